"""Perturbative route: regularized tadpoles and order-lam**2 self-energies.

Zero temperature works with continuous momenta and contour integrals
evaluated analytically; the e^{+ik eps} splitting factor of the
time-splitting scheme only ever enters as the rule "close the contour
in the upper half plane", never as a finite eps.  Finite temperature
uses the winding expansion: the Matsubara sum is traded for a sum over
images n with weights (-e^{-mu beta})^n, each image integral done by
residues.  Every thermal value is computed both by geometric closed
form and by the truncated winding sum with an explicit tail bound, and
the two must agree.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .model import (
    DEFAULT_POLICY,
    ConsistencyError,
    FrequencyKind,
    MatsubaraFrequency,
    ModelParams,
    NumericPolicy,
    RegularizationScheme,
    fermi_occupation,
)
from .analytic import PoleDecomposition

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-13, limit=300)


@dataclass(frozen=True)
class TadpoleResult:
    """Zero-temperature <phi> at first order, with the bare loop integral
    kept alongside the assembled value for auditing."""

    value: float
    loop_integral: float
    pole_term: float
    scheme: "RegularizationScheme"
    branch: str


@dataclass(frozen=True)
class WindingExpansion:
    """Truncated image sum: terms[k] belongs to winding number
    n_start + k; the tail bound covers everything beyond."""

    mu: float
    beta: float
    n_start: int
    terms: tuple[float, ...]
    value: float
    tail_bound: float
    max_winding: int


@dataclass(frozen=True)
class ThermalTadpole:
    value: float
    winding: WindingExpansion
    branch: str
    continuum_term_included: bool
    cross_check_abs_err: float


@dataclass(frozen=True)
class SelfEnergyValue:
    momentum: object  # real momentum or MatsubaraFrequency
    order: int
    value: complex
    route: str
    cross_check: str
    cross_check_abs_err: float


def tadpole_phi(
    params: ModelParams, scheme: RegularizationScheme
) -> TadpoleResult:
    """First-order <phi> at zero temperature.

    Time splitting: the regulator closes the momentum contour in the
    upper half plane, so the loop vanishes for mu>0 and picks up the
    full pole, -1, for mu<0.  Symmetric: the convergent symmetrized
    integral is 1/2 for either sign, and mu<0 adds the same encircled
    pole on top.  value = (lam/m**2) * (loop + pole term).
    """
    if not params.zero_temperature:
        raise ValueError(
            "tadpole_phi is the zero-temperature limit; "
            "use tadpole_phi_thermal at finite beta"
        )
    if params.mu == 0.0:
        raise ValueError("ground-state sector degenerate")
    branch = "mu>0" if params.mu > 0 else "mu<0"
    if scheme is RegularizationScheme.TIME_SPLITTING:
        loop = 0.0
        pole = 0.0 if params.mu > 0 else -1.0
    elif scheme is RegularizationScheme.SYMMETRIC:
        loop = 0.5
        pole = 0.0 if params.mu > 0 else -1.0
    else:
        raise ValueError(f"unknown regularization scheme {scheme!r}")
    pref = params.lam / params.m**2
    return TadpoleResult(
        value=pref * (loop + pole),
        loop_integral=loop,
        pole_term=pole,
        scheme=scheme,
        branch=branch,
    )


def tadpole_phi_thermal(
    params: ModelParams,
    max_winding: int | None = None,
    policy: NumericPolicy = DEFAULT_POLICY,
) -> ThermalTadpole:
    """First-order <phi> at finite beta: -(lam/m**2) e^{-mu beta}/(1+e^{-mu beta}).

    Computed by geometric resummation and, independently, by the
    truncated winding sum.  For mu<0 the n=0 image is the continuum
    (zero-temperature) term, which no longer vanishes and is prepended
    to the sum; the images then decay in e^{-|mu| beta}.
    """
    params.require_thermal("tadpole_phi_thermal")
    if params.mu == 0.0:
        raise ValueError(
            "winding expansion does not decay at mu=0 (degenerate sectors)"
        )
    if max_winding is None:
        max_winding = policy.winding_cutoff
    if max_winding < 1:
        raise ValueError(f"max_winding must be >= 1, got {max_winding}")

    pref = params.lam / params.m**2
    y = math.exp(-abs(params.mu) * params.beta)
    scale = max(abs(pref), 1.0)

    terms: list[float] = []
    if params.mu > 0:
        n_start = 1
    else:
        n_start = 0
        terms.append(pref * -1.0)  # contour pole of the n=0 continuum term
    tail = math.inf
    sign = 1.0 if params.mu > 0 else -1.0
    for n in range(1, max_winding + 1):
        t = sign * pref * (-y) ** n
        terms.append(t)
        tail = scale * y ** (n + 1) / (1.0 - y)
        if tail <= policy.abs_tol:
            break
    if tail > policy.abs_tol:
        raise ValueError(
            f"max_winding={max_winding} only reaches winding tail bound "
            f"{tail:.3e}, above abs_tol={policy.abs_tol:.3e}"
        )
    winding_value = math.fsum(terms)
    closed = -pref * fermi_occupation(params.mu, params.beta)
    err = abs(closed - winding_value)
    if err > policy.abs_tol + tail:
        raise ConsistencyError(
            f"thermal tadpole routes disagree: closed {closed!r} vs "
            f"winding {winding_value!r} (|diff|={err:.3e})"
        )
    return ThermalTadpole(
        value=closed,
        winding=WindingExpansion(
            mu=params.mu,
            beta=params.beta,
            n_start=n_start,
            terms=tuple(terms),
            value=winding_value,
            tail_bound=tail,
            max_winding=max_winding,
        ),
        branch="mu>0" if params.mu > 0 else "mu<0 with n=0 continuum term",
        continuum_term_included=params.mu < 0,
        cross_check_abs_err=err,
    )


def _quad_complex(f_re, f_im) -> complex:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        re, _ = quad(f_re, -np.inf, np.inf, **_QUAD_OPTS)
        im, _ = quad(f_im, -np.inf, np.inf, **_QUAD_OPTS)
    return complex(re, im)


def fermion_self_energy_2(
    params: ModelParams, p: float, policy: NumericPolicy = DEFAULT_POLICY
) -> SelfEnergyValue:
    """Order-lam**2 fermion propagator correction at zero temperature:

        S2(p) = lam**2/(-ip+mu)**2 * 1/(2m) * 1/(-ip+mu+m)

    from closing the boson-exchange loop in the upper half plane.  The
    closed form is checked against adaptive quadrature of the defining
    k-integral and the two must agree to abs_tol.
    """
    if not params.zero_temperature:
        raise ValueError("fermion self-energy is implemented at zero temperature only")
    if not params.mu > 0:
        raise ValueError(
            "mu must be positive: for mu<0 the tadpole no longer vanishes "
            "and its insertion diagram is not implemented"
        )
    m, mu, lam = params.m, params.mu, params.lam
    gsq = 1.0 / (-1j * p + mu) ** 2
    closed = lam**2 * gsq / (2.0 * m * (-1j * p + mu + m))

    # loop integral: fermion line at k, boson line at p-k
    def f_re(k):
        return mu / ((k * k + mu * mu) * ((p - k) ** 2 + m * m))

    def f_im(k):
        return k / ((k * k + mu * mu) * ((p - k) ** 2 + m * m))

    numeric = lam**2 * gsq * _quad_complex(f_re, f_im) / (2.0 * math.pi)
    err = abs(closed - numeric)
    if err > policy.abs_tol:
        raise ConsistencyError(
            f"fermion self-energy routes disagree at p={p!r}: "
            f"closed {closed!r} vs quadrature {numeric!r}"
        )
    return SelfEnergyValue(
        momentum=p,
        order=2,
        value=closed,
        route="contour-closed form",
        cross_check="adaptive quadrature of the loop integral",
        cross_check_abs_err=err,
    )


def _fit_grid(m: float) -> np.ndarray:
    # spans both pole scales without sitting on either
    return np.geomspace(m / 10.0, 10.0 * m, 16)


def extract_pole_decomposition(
    params: ModelParams, policy: NumericPolicy = DEFAULT_POLICY
) -> PoleDecomposition:
    """Match S2(p) to the double-pole-plus-simple-pole form.

    S2(p)*(-ip+mu)**2*(-ip+mu+m) must be momentum independent; flatness
    over a 16-point log grid is asserted, then the constant fixes
    delta_mu = -C/m and z1f = C/m**2.
    """
    m, mu = params.m, params.mu
    grid = _fit_grid(m)
    numer = np.empty(len(grid), dtype=complex)
    for i, p in enumerate(grid):
        s2 = fermion_self_energy_2(params, float(p), policy).value
        numer[i] = s2 * (-1j * p + mu) ** 2 * (-1j * p + mu + m)
    mean = numer.mean()
    spread = np.abs(numer - mean).max()
    tol = policy.abs_tol * max(1.0, abs(mean))
    if spread > tol or abs(mean.imag) > tol:
        raise ConsistencyError(
            f"matched numerator varies over the momentum grid "
            f"(spread {spread:.3e}, imag {mean.imag:.3e}); "
            "upstream self-energy is inconsistent"
        )
    c = mean.real
    return PoleDecomposition(delta_mu=-c / m, z1f=c / m**2)


def boson_self_energy_2(
    params: ModelParams,
    p,
    beta: float | None = None,
    policy: NumericPolicy = DEFAULT_POLICY,
) -> SelfEnergyValue:
    """Order-lam**2 connected boson propagator correction.

    Zero temperature: identically 0 (both fermion-loop poles sit in the
    lower half plane); the returned value is symbolic 0 with the
    quadrature of the loop integral recorded as the cross check.
    Finite beta: external momentum must sit on the bosonic grid; every
    p != 0 vanishes winding by winding, and p = 0 carries the
    coefficient of beta*delta_{p,0}: lam**2/m**4 * x/(1+x)**2 with
    x = e^{-mu beta}.
    """
    if beta is None:
        beta = params.beta
    if not params.mu > 0:
        raise ValueError("mu must be positive for the fermion-loop winding expansion")
    m, mu, lam = params.m, params.mu, params.lam

    if math.isinf(beta):
        if isinstance(p, MatsubaraFrequency):
            raise ValueError(
                "grid momentum supplied at beta=inf; pass a real momentum"
            )
        pv = float(p)

        # closed fermion loop with two insertions, rationalized integrand
        def f_re(k):
            return (k * (k + pv) - mu * mu) / (
                (k * k + mu * mu) * ((k + pv) ** 2 + mu * mu)
            )

        def f_im(k):
            return (mu * (2.0 * k + pv)) / (
                (k * k + mu * mu) * ((k + pv) ** 2 + mu * mu)
            )

        loop = _quad_complex(f_re, f_im) / (2.0 * math.pi)
        pref = lam**2 / (pv * pv + m * m) ** 2
        err = abs(pref * loop)
        if err > policy.abs_tol:
            raise ConsistencyError(
                f"zero-temperature fermion loop failed to vanish at p={pv!r}: "
                f"quadrature gives {loop!r}"
            )
        return SelfEnergyValue(
            momentum=pv,
            order=2,
            value=0.0 + 0.0j,
            route="contour argument: both poles below the real axis",
            cross_check="adaptive quadrature of the loop integral",
            cross_check_abs_err=err,
        )

    if not isinstance(p, MatsubaraFrequency):
        raise ValueError("momentum must be discretized in a periodic way")
    if p.kind is not FrequencyKind.BOSONIC:
        raise ValueError(
            "external boson momentum must sit on the bosonic grid: "
            "momentum must be discretized in a periodic way"
        )
    if p.beta != beta:
        raise ValueError(
            f"momentum grid beta {p.beta!r} does not match requested beta {beta!r}"
        )

    if p.index != 0:
        return SelfEnergyValue(
            momentum=p,
            order=2,
            value=0.0 + 0.0j,
            route="every winding term carries (e^{ip beta n} - ...) = 0 on the grid",
            cross_check="exact grid identity",
            cross_check_abs_err=0.0,
        )

    x = math.exp(-mu * beta)
    pref = lam**2 / m**4
    closed = pref * x / (1.0 + x) ** 2
    # winding route: coefficient is -sum_{n>=1} n (-x)^n
    max_winding = policy.winding_cutoff
    s = 0.0
    tail = math.inf
    for n in range(1, max_winding + 1):
        s += n * (-x) ** n
        tail = x ** (n + 1) * (n + 1) / (1.0 - x) ** 2
        if tail * max(pref, 1.0) <= policy.abs_tol:
            break
    if tail * max(pref, 1.0) > policy.abs_tol:
        raise ValueError(
            f"winding_cutoff={max_winding} only reaches tail bound "
            f"{tail:.3e}, above abs_tol={policy.abs_tol:.3e}"
        )
    winding_value = -pref * s
    err = abs(winding_value - closed)
    if err > policy.abs_tol + tail * max(pref, 1.0):
        raise ConsistencyError(
            f"p=0 boson correction routes disagree: closed {closed!r} vs "
            f"winding {winding_value!r}"
        )
    return SelfEnergyValue(
        momentum=p,
        order=2,
        value=complex(closed, 0.0),
        route="coefficient of beta*delta_{p,0}, geometric closed form",
        cross_check=f"winding sum to tail bound {tail:.2e}",
        cross_check_abs_err=err,
    )


def boson_correction_real_space(
    params: ModelParams,
    beta: float | None = None,
    policy: NumericPolicy = DEFAULT_POLICY,
) -> float:
    """Order-lam**2 correction to <phi(tau) phi(0)> at finite beta.

    Connected p=0 coefficient plus the squared thermal tadpole; the tau
    dependence cancels between them, leaving lam**2/m**4 * x/(1+x).
    """
    if beta is None:
        beta = params.beta
    if math.isinf(beta):
        raise ValueError("real-space thermal correction needs finite beta")
    run = params if params.beta == beta else ModelParams(
        m=params.m, mu=params.mu, lam=params.lam, beta=beta
    )
    connected = boson_self_energy_2(
        run, MatsubaraFrequency(FrequencyKind.BOSONIC, 0, beta), beta, policy
    ).value.real
    tad = tadpole_phi_thermal(run, policy=policy).value
    return connected + tad * tad
