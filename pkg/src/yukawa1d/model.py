"""Model parameters, thermal frequency grids, and shared numeric policy.

The Euclidean action couples one harmonic mode of frequency ``m`` to a
single fermionic two-level mode of bare energy ``mu`` through a linear
term ``lam * phi * psibar psi``.  In Hamiltonian form

    H = (p**2 + m**2 q**2)/2 + mu c'c + lam q c'c

so the fermion number N = c'c is conserved and everything splits into an
N=0 and an N=1 oscillator sector.  All downstream routes (closed forms,
truncated diagonalization, winding sums, the lattice sampler) read their
parameters from :class:`ModelParams`.

Zero temperature is represented by the distinguished value
``beta = INFINITE_BETA`` (IEEE infinity).  Thermal code must branch on
it explicitly rather than relying on exp(-inf) arithmetic to do the
right thing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

INFINITE_BETA = math.inf


class ConsistencyError(RuntimeError):
    """Two routes to the same number disagreed beyond tolerance."""


class FrequencyKind(Enum):
    BOSONIC = "bosonic"
    FERMIONIC = "fermionic"


class RegularizationScheme(Enum):
    """Equal-time ordering prescription for the fermion bilinear.

    TIME_SPLITTING points the splitting regulator toward positive
    Euclidean time, SYMMETRIC averages the two orderings.  They disagree
    on the closed fermion loop by a mu-independent 1/2.
    """

    TIME_SPLITTING = "time-splitting"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class ModelParams:
    """Couplings of one run: boson mass m, fermion energy mu, Yukawa lam.

    beta defaults to INFINITE_BETA (zero temperature).  mu and lam may
    take either sign; m must be positive.
    """

    m: float
    mu: float
    lam: float
    beta: float = INFINITE_BETA

    def __post_init__(self):
        # "not >" also rejects NaN
        if not self.m > 0:
            raise ValueError(f"boson mass must be positive, got m={self.m!r}")
        if not self.beta > 0:
            raise ValueError(
                f"beta must be positive or INFINITE_BETA, got beta={self.beta!r}"
            )
        for name in ("mu", "lam"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    def require_thermal(self, what: str) -> None:
        if self.zero_temperature:
            raise ValueError(f"{what}: thermal grid undefined at zero temperature")


@dataclass(frozen=True)
class MatsubaraFrequency:
    """One point of the thermal frequency grid at inverse temperature beta.

    Bosonic grid: 2 pi n / beta.  Fermionic grid: 2 pi (n + 1/2) / beta.
    Only defined at finite beta; zero-temperature code works with
    continuous real momenta instead.
    """

    kind: FrequencyKind
    index: int
    beta: float

    def __post_init__(self):
        if not isinstance(self.kind, FrequencyKind):
            raise ValueError(f"kind must be a FrequencyKind, got {self.kind!r}")
        if not isinstance(self.index, int):
            raise ValueError(f"grid index must be an integer, got {self.index!r}")
        if math.isinf(self.beta):
            raise ValueError("thermal grid undefined at zero temperature")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")

    @property
    def value(self) -> float:
        if self.kind is FrequencyKind.BOSONIC:
            return 2.0 * math.pi * self.index / self.beta
        return 2.0 * math.pi * (self.index + 0.5) / self.beta


def matsubara_value(kind: FrequencyKind, index: int, beta: float) -> float:
    """Frequency of grid point ``index``; raises at beta = inf."""
    return MatsubaraFrequency(kind, index, beta).value


def fermi_occupation(mu: float, beta: float) -> float:
    """Occupation 1/(e**(mu beta) + 1) of the two-level mode.

    Evaluated in the branch of the two equivalent forms that keeps the
    exponential argument non-positive, so large |mu*beta| cannot
    overflow.
    """
    if math.isinf(beta):
        raise ValueError(
            "fermi occupation undefined at beta=inf; branch on zero temperature explicitly"
        )
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    t = mu * beta
    if t >= 0:
        e = math.exp(-t)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(t))


@dataclass(frozen=True)
class NumericPolicy:
    """Knobs shared by the checked numeric routes.

    abs_tol          target absolute accuracy of series truncations and
                     the dual-route agreement assertions
    winding_cutoff   hard cap on winding-expansion terms; sums that
                     cannot reach abs_tol within the cap raise instead
                     of silently returning a worse answer
    truncation_nmax  default oscillator truncation for exact
                     diagonalization
    """

    abs_tol: float = 1e-10
    winding_cutoff: int = 512
    truncation_nmax: int = 60

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.winding_cutoff < 1:
            raise ValueError("winding_cutoff must be at least 1")
        if self.truncation_nmax < 1:
            raise ValueError("truncation_nmax must be at least 1")


DEFAULT_POLICY = NumericPolicy()
