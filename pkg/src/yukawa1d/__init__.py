"""Numerical laboratory for a Yukawa-coupled oscillator in 0+1 dimensions.

One bosonic mode (frequency m) linearly coupled to one fermionic
two-level mode (bare energy mu) with strength lam.  The same spectra and
Euclidean correlators are computed along independent routes: closed
forms, truncated exact diagonalization, regularized perturbation theory
with winding-number resummation at finite temperature, and a Metropolis
sampler for the lattice path integral.  The routes are required to agree
to stated tolerances; the verification module runs the whole battery.
"""

__version__ = "0.1.0"

from .model import (
    INFINITE_BETA,
    FrequencyKind,
    MatsubaraFrequency,
    ModelParams,
    NumericPolicy,
    RegularizationScheme,
    fermi_occupation,
    matsubara_value,
)

__all__ = [
    "INFINITE_BETA",
    "FrequencyKind",
    "MatsubaraFrequency",
    "ModelParams",
    "NumericPolicy",
    "RegularizationScheme",
    "fermi_occupation",
    "matsubara_value",
    "__version__",
]
