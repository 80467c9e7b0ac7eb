"""Cross-route verification suite.

Every check compares two independent routes to the same number (closed
form, truncated diagonalization, winding/contour sums, Monte Carlo) and
reports a uniform row: name, the two routes, expected/actual values,
absolute error, tolerance, pass.  The CLI serializes the assembled
report as JSON; the test suite asserts on the same rows, so there is a
single source of truth for what "verified" means.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
import scipy
import numba

from . import __version__
from .model import (
    INFINITE_BETA,
    FrequencyKind,
    MatsubaraFrequency,
    ModelParams,
    NumericPolicy,
    RegularizationScheme,
    fermi_occupation,
)
from . import analytic, exactdiag, lattice, loops, matsubara


@dataclass(frozen=True)
class CheckRow:
    name: str
    route_a: str
    route_b: str
    expected: float
    actual: float
    abs_err: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "route_a": self.route_a,
            "route_b": self.route_b,
            "expected": self.expected,
            "actual": self.actual,
            "abs_err": self.abs_err,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _row(name, route_a, route_b, expected, actual, tolerance, passed=None):
    err = abs(float(actual) - float(expected))
    if passed is None:
        passed = err <= tolerance
    return CheckRow(
        name=name,
        route_a=route_a,
        route_b=route_b,
        expected=float(expected),
        actual=float(actual),
        abs_err=err,
        tolerance=float(tolerance),
        passed=bool(passed),
    )


@dataclass(frozen=True)
class VerifyOptions:
    n_max: int = 60
    n_max_fine: int = 80
    n_tau: int = 64
    sweeps: int = 4_000_000
    seed: int = 0
    winding_cutoff: int = 512

    def policy(self, abs_tol: float = 1e-10) -> NumericPolicy:
        return NumericPolicy(
            abs_tol=abs_tol,
            winding_cutoff=self.winding_cutoff,
            truncation_nmax=self.n_max,
        )


def check_spectrum(opts: VerifyOptions) -> list[CheckRow]:
    p = ModelParams(m=1.0, mu=1.0, lam=1.0)
    es = exactdiag.diagonalize(p, n_max=opts.n_max)
    worst = 0.0
    for sector in analytic.Sector:
        idx = np.flatnonzero(es.sectors == sector.value)[:11]
        for n, i in enumerate(idx):
            ref = analytic.energy(p, analytic.SectorLevel(sector, n))
            worst = max(worst, abs(es.energies[i] - ref))
    return [
        _row("spectrum-match", "exactdiag eigh", "closed-form levels",
             0.0, worst, 1e-8)
    ]


def check_truncation_convergence(opts: VerifyOptions) -> list[CheckRow]:
    p = ModelParams(m=1.0, mu=1.0, lam=1.0, beta=4.0)
    n = opts.n_max
    grid = sorted({max(2, n // 8), max(3, n // 4), max(4, n // 2), max(5, n)})

    def obs(es):
        q = exactdiag.position_operator(es.basis, p)
        return exactdiag.thermal_expectation(q, es, beta=4.0)

    rep = exactdiag.truncation_sweep(p, 4.0, obs, grid, tol=1e-8)
    return [
        _row("truncation-convergence", "thermal <q> along n_max sweep",
             "successive-difference plateau", 0.0, abs(rep.diffs[-1]), rep.tol,
             passed=rep.converged)
    ]


def check_tadpole_zero_T(opts: VerifyOptions) -> list[CheckRow]:
    pp = ModelParams(m=1.0, mu=1.0, lam=1.0)
    pm = ModelParams(m=1.0, mu=-1.0, lam=1.0)
    ts_p = matsubara.tadpole_phi(pp, RegularizationScheme.TIME_SPLITTING)
    ts_m = matsubara.tadpole_phi(pm, RegularizationScheme.TIME_SPLITTING)
    sym = matsubara.tadpole_phi(pp, RegularizationScheme.SYMMETRIC)
    return [
        _row("tadpole-zero-T-ts-empty", "time-splitting contour",
             "exact <q>=0, mu>0", 0.0, ts_p.value, 0.0),
        _row("tadpole-zero-T-ts-occupied", "time-splitting contour",
             "exact <q>=-lam/m^2, mu<0",
             -pm.lam / pm.m**2, ts_m.value, 0.0),
        _row("tadpole-zero-T-sym-loop", "symmetric-scheme loop integral",
             "theta(0)=1/2 value", 0.5, sym.loop_integral, 0.0),
    ]


def check_pole_decomposition(opts: VerifyOptions) -> list[CheckRow]:
    p = ModelParams(m=1.0, mu=1.0, lam=1.0)
    got = matsubara.extract_pole_decomposition(p)
    want = analytic.predicted_pole_decomposition(p)
    rows = [
        _row("pole-decomposition-delta-mu", "momentum-grid fit of Sigma_2",
             "closed-form -lam^2/2m^2", want.delta_mu, got.delta_mu, 1e-10),
        _row("pole-decomposition-z1f", "momentum-grid fit of Sigma_2",
             "closed-form +lam^2/2m^3", want.z1f, got.z1f, 1e-10),
    ]

    def residual(lam):
        q = ModelParams(m=1.0, mu=1.0, lam=lam)
        z = matsubara.extract_pole_decomposition(q).z1f
        return abs((1.0 - analytic.ground_state_overlap(q) ** 2) - z)

    ratio = residual(0.5) / residual(0.25)
    rows.append(
        _row("pole-overlap-ratio", "overlap deficit residual at lam=0.5/0.25",
             "lam^4 scaling, ratio 16", 16.0, ratio, 0.2 * 16.0)
    )
    return rows


def check_fermion_loop_vanishing(opts: VerifyOptions) -> list[CheckRow]:
    p = ModelParams(m=1.0, mu=1.0, lam=1.0)
    worst = 0.0
    for mom in np.geomspace(0.1, 10.0, 16):
        r = matsubara.boson_self_energy_2(p, float(mom))
        worst = max(worst, abs(r.value), r.cross_check_abs_err)
    return [
        _row("fermion-loop-vanishing-zero-T", "contour closure (no poles)",
             "adaptive quadrature", 0.0, worst, 1e-12)
    ]


def check_thermal_boson_correction(opts: VerifyOptions) -> list[CheckRow]:
    beta = float(np.log(3.0))
    p = ModelParams(m=1.0, mu=1.0, lam=1.0, beta=beta)
    f = fermi_occupation(p.mu, beta)
    w0 = MatsubaraFrequency(FrequencyKind.BOSONIC, 0, beta)
    conn = matsubara.boson_self_energy_2(p, w0, beta=beta)
    disc = matsubara.tadpole_phi_thermal(p).value ** 2
    total = matsubara.boson_correction_real_space(p, beta=beta)
    rows = [
        _row("thermal-boson-connected-p0", "winding sum", "x/(1+x)^2 closed form",
             0.1875, conn.value.real, 1e-12),
        _row("thermal-boson-disconnected", "thermal tadpole squared",
             "(lam/m^2 f)^2", 0.0625, disc, 1e-12),
        _row("thermal-boson-total", "connected + disconnected",
             "(lam^2/m^4) fermi_occupation", (p.lam**2 / p.m**4) * f, total,
             1e-12),
    ]
    worst = 0.0
    for idx in range(1, 5):
        w = MatsubaraFrequency(FrequencyKind.BOSONIC, idx, beta)
        worst = max(worst, abs(matsubara.boson_self_energy_2(p, w, beta=beta).value))
    rows.append(
        _row("thermal-boson-nonzero-p", "grid orthogonality", "exact zero",
             0.0, worst, 0.0)
    )
    return rows


def check_j_point_identity(opts: VerifyOptions) -> list[CheckRow]:
    rng = np.random.default_rng(opts.seed)
    policy = opts.policy(1e-12)
    worst = 0.0
    for mu in rng.uniform(0.5, 3.0, size=10):
        f = fermi_occupation(float(mu), 1.0)
        for j in range(1, 7):
            v = loops.full_number_correlator(j, float(mu), 1.0, policy)
            worst = max(worst, abs(v - f))
    return [
        _row("j-point-identity", "set-partition assembly of loops",
             "fermi_occupation", 0.0, worst, 1e-10)
    ]


def check_telescoping(opts: VerifyOptions) -> list[CheckRow]:
    rng = np.random.default_rng(opts.seed)
    worst = 0.0
    ok = True
    for mu in rng.uniform(0.5, 3.0, size=10):
        for j in range(2, 7):
            rep = loops.telescoping_check(j, float(mu), 1.0, tolerance=1e-12)
            worst = max(worst, rep.residual)
            ok = ok and rep.passed
    return [
        _row("telescoping", "term-by-term induction step", "-f target",
             0.0, worst, 1e-12, passed=ok and worst <= 1e-12)
    ]


def check_permutation_cancellation(opts: VerifyOptions) -> list[CheckRow]:
    mu, beta = 1.0, 2.0
    policy = opts.policy(1e-13)
    w = lambda n: MatsubaraFrequency(FrequencyKind.BOSONIC, n, beta)
    rows = []
    # j=4 needs q = +-p: with generic q the orderings whose partial sums
    # are all distinct vanish identically (residues of a falling rational
    # function sum to zero), and "every ordering nonzero" would be false
    for name, moms in [
        ("permutation-cancellation-j3", (w(0), w(2), w(-2))),
        ("permutation-cancellation-j4", (w(1), w(-1), w(1), w(-1))),
    ]:
        j = len(moms)
        singles = []
        for rest in permutations(moms[1:]):
            spec = loops.LoopSpec(
                momenta=(moms[0],) + rest, mu=mu, beta=beta,
                max_winding=opts.winding_cutoff,
            )
            singles.append(loops.connected_loop(spec, policy).value)
        sym = loops.permutation_symmetrized_loop(j, moms, mu, beta, policy)
        nonzero = min(abs(v) for v in singles) > 1e-10
        rows.append(
            _row(name, "sum over cyclic orderings",
                 "exact zero (momenta conserved only in pairs)",
                 0.0, abs(sym), 1e-10, passed=nonzero and abs(sym) <= 1e-10)
        )
    return rows


def check_thermal_two_point(opts: VerifyOptions) -> list[CheckRow]:
    p = ModelParams(m=1.0, mu=1.0, lam=1.0, beta=4.0)
    es = exactdiag.diagonalize(p, n_max=opts.n_max_fine)
    q = exactdiag.position_operator(es.basis, p)
    taus = np.linspace(0.0, 4.0, 32)
    worst = 0.0
    for tau in taus:
        ed = exactdiag.time_ordered_two_point(
            q, q, float(tau), es, beta=4.0,
            statistics=exactdiag.Statistics.BOSONIC,
        )
        worst = max(worst, abs(ed - analytic.exact_thermal_two_point(p, float(tau))))
    rows = [
        _row("thermal-two-point", "exactdiag spectral sum",
             "oscillator curve + occupation shift", 0.0, worst, 1e-7)
    ]
    p0 = ModelParams(m=1.0, mu=1.0, lam=0.0, beta=4.0)
    es0 = exactdiag.diagonalize(p0, n_max=opts.n_max_fine)
    q0 = exactdiag.position_operator(es0.basis, p0)
    worst0 = 0.0
    for tau in taus:
        ed = exactdiag.time_ordered_two_point(
            q0, q0, float(tau), es0, beta=4.0,
            statistics=exactdiag.Statistics.BOSONIC,
        )
        worst0 = max(worst0, abs(ed - analytic.ho_thermal_correlator(1.0, 4.0, float(tau))))
    rows.append(
        _row("thermal-two-point-free", "exactdiag spectral sum at lam=0",
             "oscillator closed form", 0.0, worst0, 1e-10)
    )
    return rows


def _ed_thermal_q(params: ModelParams, n_max: int) -> float:
    es = exactdiag.diagonalize(params, n_max=n_max)
    q = exactdiag.position_operator(es.basis, params)
    return exactdiag.thermal_expectation(q, es, beta=params.beta)


def check_thermal_tadpole(opts: VerifyOptions) -> list[CheckRow]:
    p = ModelParams(m=1.0, mu=1.0, lam=1.0, beta=4.0)
    ed = _ed_thermal_q(p, opts.n_max)
    exact = analytic.phi_vev_fermion(p) * fermi_occupation(
        analytic.mass_shift(p), p.beta
    )
    pert = matsubara.tadpole_phi_thermal(p).value
    pert_target = analytic.phi_vev_fermion(p) * fermi_occupation(p.mu, p.beta)
    rows = [
        _row("thermal-tadpole-exact", "exactdiag thermal <q>",
             "-(lam/m^2) f(mu_lambda beta)", exact, ed, 1e-8),
        _row("thermal-tadpole-first-order", "winding tadpole",
             "-(lam/m^2) f(mu beta)", pert_target, pert, 1e-12),
    ]

    def gap(lam):
        q = ModelParams(m=1.0, mu=1.0, lam=lam, beta=4.0)
        return _ed_thermal_q(q, opts.n_max) - matsubara.tadpole_phi_thermal(q).value

    ratio = gap(0.2) / gap(0.1)
    rows.append(
        _row("tadpole-order-scaling", "exact-minus-first-order gap at lam=0.2/0.1",
             "lam^3 scaling, ratio 8", 8.0, ratio, 0.25 * 8.0)
    )
    return rows


def check_monte_carlo(opts: VerifyOptions) -> list[CheckRow]:
    p = ModelParams(m=1.0, mu=1.0, lam=1.0, beta=4.0)
    es = exactdiag.diagonalize(p, n_max=opts.n_max)
    q = exactdiag.position_operator(es.basis, p)
    ed_phi = exactdiag.thermal_expectation(q, es, beta=4.0)
    ed_corr = exactdiag.time_ordered_two_point(
        q, q, 2.0, es, beta=4.0, statistics=exactdiag.Statistics.BOSONIC
    )

    lat = lattice.LatticeConfig(n_tau=opts.n_tau, beta=4.0)
    mc = lattice.MCParams(sweeps=opts.sweeps, seed=opts.seed)
    res = lattice.run_chain(p, lat, mc)
    e_phi = res.phi
    e_corr = res.corr[opts.n_tau // 2]
    return [
        _row("monte-carlo-phi", "lattice Metropolis chain",
             "exactdiag thermal <q>", ed_phi, e_phi.mean, 3.0 * e_phi.stderr),
        _row("monte-carlo-correlator", "lattice Metropolis chain",
             "exactdiag <q(beta/2)q(0)>", ed_corr, e_corr.mean,
             3.0 * e_corr.stderr),
        _row("monte-carlo-phi-stderr", "blocked stderr / |expected|",
             "1% budget", 0.0, e_phi.stderr / abs(ed_phi), 1e-2),
        _row("monte-carlo-correlator-stderr", "blocked stderr / |expected|",
             "1% budget", 0.0, e_corr.stderr / abs(ed_corr), 1e-2),
        _row("monte-carlo-thermalized", "half-chain drift test",
             "z < 4 flag", 1.0, 1.0 if res.thermalized else 0.0, 0.0),
    ]


ALL_CHECKS = [
    check_spectrum,
    check_truncation_convergence,
    check_tadpole_zero_T,
    check_pole_decomposition,
    check_fermion_loop_vanishing,
    check_thermal_boson_correction,
    check_j_point_identity,
    check_telescoping,
    check_permutation_cancellation,
    check_thermal_two_point,
    check_thermal_tadpole,
    check_monte_carlo,
]


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckRow, ...]
    overall_pass: bool
    provenance: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "checks": [c.as_dict() for c in self.checks],
            "overall_pass": self.overall_pass,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def run_all(opts: VerifyOptions = VerifyOptions(), skip_mc: bool = False) -> VerificationReport:
    rows: list[CheckRow] = []
    for check in ALL_CHECKS:
        if skip_mc and check is check_monte_carlo:
            continue
        rows.extend(check(opts))
    provenance = {
        "package": "yukawa1d",
        "version": __version__,
        "seed": opts.seed,
        "parameters": {
            "n_max": opts.n_max,
            "n_max_fine": opts.n_max_fine,
            "n_tau": opts.n_tau,
            "sweeps": opts.sweeps,
            "winding_cutoff": opts.winding_cutoff,
        },
        "rng": "numpy PCG64",
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }
    return VerificationReport(
        checks=tuple(rows),
        overall_pass=all(r.passed for r in rows),
        provenance=provenance,
    )
