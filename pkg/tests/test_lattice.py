import io
import math
from types import SimpleNamespace

import numpy as np
import pytest

from yukawa1d.model import ModelParams, fermi_occupation
from yukawa1d.lattice import (
    ChainEstimate,
    LatticeConfig,
    MCParams,
    blocking_estimate,
    boson_action,
    fermion_weight,
    log_fermion_weight,
    metropolis_sweep,
    run_chain,
    _run_sweeps,
)


def test_lattice_config_validation():
    lat = LatticeConfig(n_tau=16, beta=4.0)
    assert lat.a == 0.25
    with pytest.raises(ValueError, match="even and >= 8"):
        LatticeConfig(n_tau=9, beta=4.0)
    with pytest.raises(ValueError, match="even and >= 8"):
        LatticeConfig(n_tau=6, beta=4.0)
    with pytest.raises(ValueError, match="finite and positive"):
        LatticeConfig(n_tau=16, beta=math.inf)
    with pytest.raises(ValueError, match="finite and positive"):
        LatticeConfig(n_tau=16, beta=-1.0)


def test_boson_action_direct_sum():
    p = ModelParams(m=1.3, mu=1.0, lam=0.5, beta=4.0)
    lat = LatticeConfig(n_tau=16, beta=4.0)
    assert boson_action(np.zeros(16), p, lat) == 0.0
    c = 0.7
    np.testing.assert_allclose(
        boson_action(np.full(16, c), p, lat),
        4.0 * 0.5 * p.m**2 * c * c,
        rtol=1e-14,
    )
    rng = np.random.default_rng(2)
    phi = rng.normal(size=16)
    a = lat.a
    want = sum(
        (phi[(i + 1) % 16] - phi[i]) ** 2 / (2 * a) + 0.5 * a * p.m**2 * phi[i] ** 2
        for i in range(16)
    )
    np.testing.assert_allclose(boson_action(phi, p, lat), want, rtol=1e-14)


def test_fermion_weight_oracles():
    lat = LatticeConfig(n_tau=16, beta=4.0)
    free = ModelParams(m=1.0, mu=0.9, lam=0.0, beta=4.0)
    np.testing.assert_allclose(
        fermion_weight(np.random.default_rng(0).normal(size=16), free, lat),
        1.0 + math.exp(-0.9 * 4.0),
        rtol=1e-15,
    )
    p = ModelParams(m=1.0, mu=0.9, lam=0.8, beta=4.0)
    c = -0.3
    np.testing.assert_allclose(
        fermion_weight(np.full(16, c), p, lat),
        1.0 + math.exp(-4.0 * (0.9 + 0.8 * c)),
        rtol=1e-15,
    )
    heavy = ModelParams(m=1.0, mu=400.0, lam=1.0, beta=4.0)
    assert fermion_weight(np.zeros(16), heavy, lat) == 1.0
    assert log_fermion_weight(np.zeros(16), heavy, lat) == 0.0  # e^-1600 underflows
    # deep negative field drives the exponent past double range
    assert fermion_weight(np.full(16, -500.0), p, lat) == math.inf
    assert np.isfinite(log_fermion_weight(np.full(16, -500.0), p, lat))


def _py_run_sweeps(
    phi, a, msq, mu, lam, step, shift_step,
    site_prop, site_acc, shift_prop, shift_acc,
    use_shift, meas_every, meas_out,
):
    # literal transcription of the compiled kernel, op for op
    def sp(t):
        if t > 0.0:
            return t + math.log1p(math.exp(-t))
        return math.log1p(math.exp(t))

    n_sweeps = site_prop.shape[0]
    n = phi.shape[0]
    accepted = 0
    shifts_accepted = 0
    m_idx = 0
    for s in range(n_sweeps):
        t = 0.0
        for i in range(n):
            t += phi[i]
        t = -a * (mu * n + lam * t)
        for i in range(n):
            d = step * site_prop[s, i]
            il = i - 1 if i > 0 else n - 1
            ir = i + 1 if i < n - 1 else 0
            old = phi[i]
            new = old + d
            dkin = (
                (new - phi[il]) ** 2
                + (phi[ir] - new) ** 2
                - (old - phi[il]) ** 2
                - (phi[ir] - old) ** 2
            ) / (2.0 * a)
            dpot = 0.5 * a * msq * (new * new - old * old)
            tn = t - a * lam * d
            logr = -(dkin + dpot) + sp(tn) - sp(t)
            if logr >= 0.0 or site_acc[s, i] < math.exp(logr):
                phi[i] = new
                t = tn
                accepted += 1
        if use_shift:
            d = shift_step * shift_prop[s]
            ssum = 0.0
            for i in range(n):
                ssum += phi[i]
            ds = a * msq * (d * ssum + 0.5 * n * d * d)
            tn = t - a * lam * n * d
            logr = -ds + sp(tn) - sp(t)
            if logr >= 0.0 or shift_acc[s] < math.exp(logr):
                for i in range(n):
                    phi[i] += d
                shifts_accepted += 1
        if meas_every > 0 and (s + 1) % meas_every == 0:
            for i in range(n):
                meas_out[m_idx, i] = phi[i]
            m_idx += 1
    return accepted, shifts_accepted


def test_kernel_replays_bit_identically_in_python():
    n, n_sweeps, meas_every = 16, 40, 4
    rng = np.random.default_rng(42)
    site_prop = rng.uniform(-1.0, 1.0, size=(n_sweeps, n))
    site_acc = rng.random(size=(n_sweeps, n))
    shift_prop = rng.uniform(-1.0, 1.0, size=n_sweeps)
    shift_acc = rng.random(size=n_sweeps)
    args = (0.25, 1.0, 0.9, 0.8, 0.5, 0.6)

    phi_nb = np.zeros(n)
    meas_nb = np.empty((n_sweeps // meas_every, n))
    out_nb = _run_sweeps(
        phi_nb, *args, site_prop, site_acc, shift_prop, shift_acc,
        True, meas_every, meas_nb,
    )
    phi_py = np.zeros(n)
    meas_py = np.empty((n_sweeps // meas_every, n))
    out_py = _py_run_sweeps(
        phi_py, *args, site_prop, site_acc, shift_prop, shift_acc,
        True, meas_every, meas_py,
    )
    assert out_nb == out_py
    assert out_nb[0] > 0 and out_nb[1] > 0
    assert np.array_equal(phi_nb, phi_py)
    assert np.array_equal(meas_nb, meas_py)


def test_site_update_ratio_matches_global_weight():
    # the incremental log-ratio inside the kernel must equal the log of
    # the full target-density ratio, or detailed balance silently breaks
    p = ModelParams(m=1.1, mu=0.7, lam=0.9, beta=1.0)
    lat = SimpleNamespace(a=0.5, n_tau=2)

    def log_weight(phi):
        return -boson_action(phi, p, lat) + log_fermion_weight(phi, p, lat)

    grid = [-1.4, -0.3, 0.0, 0.8, 2.1]
    a, msq, lam = lat.a, p.m**2, p.lam
    worst = 0.0
    for p0 in grid:
        for p1 in grid:
            phi = np.array([p0, p1])
            t = -a * (p.mu * 2 + lam * (p0 + p1))
            for i in (0, 1):
                for d in (-0.9, 0.35, 1.7):
                    o = 1 - i
                    old, new = phi[i], phi[i] + d
                    dkin = 2 * ((new - phi[o]) ** 2 - (old - phi[o]) ** 2) / (2 * a)
                    dpot = 0.5 * a * msq * (new * new - old * old)
                    sp = np.logaddexp
                    logr = -(dkin + dpot) + sp(0, t - a * lam * d) - sp(0, t)
                    trial = phi.copy()
                    trial[i] = new
                    worst = max(worst, abs(logr - (log_weight(trial) - log_weight(phi))))
    assert worst < 1e-12


def test_shift_update_ratio_matches_global_weight():
    p = ModelParams(m=0.8, mu=0.5, lam=1.2, beta=1.0)
    lat = SimpleNamespace(a=0.125, n_tau=8)

    def log_weight(phi):
        return -boson_action(phi, p, lat) + log_fermion_weight(phi, p, lat)

    rng = np.random.default_rng(7)
    a, msq, n = lat.a, p.m**2, 8
    for _ in range(40):
        phi = rng.normal(size=n) * 1.5
        d = float(rng.uniform(-1.0, 1.0))
        t = -a * (p.mu * n + p.lam * phi.sum())
        ds = a * msq * (d * phi.sum() + 0.5 * n * d * d)
        logr = -ds + np.logaddexp(0, t - a * p.lam * n * d) - np.logaddexp(0, t)
        assert abs(logr - (log_weight(phi + d) - log_weight(phi))) < 1e-12
        # the kinetic term must not move at all under a constant shift
        def kin(v):
            return float(np.sum((np.roll(v, -1) - v) ** 2) / (2 * a))

        assert abs(kin(phi + d) - kin(phi)) < 1e-12


def test_metropolis_sweep_step_limits():
    p = ModelParams(m=1.0, mu=1.0, lam=1.0, beta=4.0)
    lat = LatticeConfig(n_tau=16, beta=4.0)
    rng = np.random.default_rng(0)
    phi = rng.normal(size=16) * 0.3
    with pytest.raises(ValueError, match="step must be positive"):
        metropolis_sweep(phi, p, lat, 0.0, rng)
    _, rate = metropolis_sweep(phi.copy(), p, lat, 1e-9, rng)
    assert rate > 0.99


def test_mcparams_validation():
    MCParams(sweeps=256, thermalization=10)
    with pytest.raises(ValueError, match="must be positive"):
        MCParams(sweeps=0)
    with pytest.raises(ValueError, match="measure_every"):
        MCParams(sweeps=256, measure_every=0)
    with pytest.raises(ValueError, match="multiple of measure_every"):
        MCParams(sweeps=258, measure_every=4)
    with pytest.raises(ValueError, match="chunk_sweeps"):
        MCParams(sweeps=256, measure_every=4, chunk_sweeps=10)
    with pytest.raises(ValueError, match="at least 64 measurements"):
        MCParams(sweeps=64, measure_every=4)
    with pytest.raises(ValueError, match="steps must be positive"):
        MCParams(sweeps=256, step=-0.1)


def test_blocking_estimate_iid_and_correlated():
    rng = np.random.default_rng(123)
    x = rng.normal(size=4096)
    est = blocking_estimate(x, seed=123)
    ref = x.std(ddof=1) / math.sqrt(x.size)
    assert 0.8 * ref < est.stderr < 1.6 * ref
    assert est.tau_int < 1.5
    assert est.n_samples == 4096
    # duplicating every sample 8 times inflates tau_int toward 4
    y = np.repeat(rng.normal(size=512), 8)
    est2 = blocking_estimate(y, seed=0)
    assert est2.tau_int > 2.5
    with pytest.raises(ValueError, match="at least 64 samples"):
        blocking_estimate(np.ones(40), seed=0)
    with pytest.raises(ValueError):
        ChainEstimate(mean=0.0, stderr=-1.0, tau_int=0.5, n_samples=10, seed=0)


def test_run_chain_rejects_mismatched_beta():
    lat = LatticeConfig(n_tau=16, beta=4.0)
    mc = MCParams(sweeps=256, thermalization=10)
    with pytest.raises(ValueError, match="finite beta"):
        run_chain(ModelParams(m=1, mu=1, lam=1), lat, mc)
    with pytest.raises(ValueError, match="does not match"):
        run_chain(ModelParams(m=1, mu=1, lam=1, beta=4.5), lat, mc)


def test_free_chain_matches_exact_lattice_propagator():
    # lam=0 decouples the fermion entirely, so the chain samples the
    # free discretized oscillator whose correlator sums in closed form
    beta, n = 4.0, 16
    p = ModelParams(m=1.0, mu=1.0, lam=0.0, beta=beta)
    lat = LatticeConfig(n_tau=n, beta=beta)
    mc = MCParams(sweeps=160_000, thermalization=4_000, seed=9)
    res = run_chain(p, lat, mc, corr_lags=[0, 2, n // 2])

    a = lat.a
    k = 2.0 * np.pi * np.arange(n) / n
    ek = (2.0 - 2.0 * np.cos(k)) / a + a * p.m**2

    def c_exact(l):
        return float(np.sum(np.cos(k * l) / ek) / n)

    assert abs(res.phi.mean) < 3.0 * res.phi.stderr
    for l in (0, 2, n // 2):
        est = res.corr[l]
        assert abs(est.mean - c_exact(l)) < 3.0 * est.stderr
        assert est.stderr < 0.03 * abs(c_exact(l)) + 1e-4
    np.testing.assert_allclose(
        res.profile_mean[2], res.corr[2].mean, rtol=1e-12
    )
    assert res.thermalized
    assert 0.35 < res.acceptance < 0.65


def test_interacting_chain_hits_exact_condensate():
    # completing the square in the occupied sector shows the lattice
    # <phi-bar> is -(lam/m^2) f(mu - lam^2/2m^2, beta) with no
    # discretization error, which makes a sharp finite-a target
    beta = 3.0
    p = ModelParams(m=1.0, mu=0.4, lam=0.9, beta=beta)
    lat = LatticeConfig(n_tau=12, beta=beta)
    mc = MCParams(sweeps=240_000, thermalization=6_000, seed=4)
    res = run_chain(p, lat, mc)
    mu_shift = p.mu - p.lam**2 / (2.0 * p.m**2)
    exact = -(p.lam / p.m**2) * fermi_occupation(mu_shift, beta)
    assert abs(res.phi.mean - exact) < 3.0 * res.phi.stderr
    assert res.phi.stderr < 0.02 * abs(exact)
    assert res.thermalized


def test_two_seeds_agree():
    beta = 4.0
    p = ModelParams(m=1.0, mu=1.0, lam=1.0, beta=beta)
    lat = LatticeConfig(n_tau=16, beta=beta)
    r1 = run_chain(p, lat, MCParams(sweeps=80_000, thermalization=3_000, seed=1))
    r2 = run_chain(p, lat, MCParams(sweeps=80_000, thermalization=3_000, seed=2))
    l = 8
    z = abs(r1.corr[l].mean - r2.corr[l].mean) / math.hypot(
        r1.corr[l].stderr, r2.corr[l].stderr
    )
    assert z < 3.5


def test_run_chain_is_deterministic():
    beta = 4.0
    p = ModelParams(m=1.0, mu=1.0, lam=1.0, beta=beta)
    lat = LatticeConfig(n_tau=16, beta=beta)
    mc = MCParams(sweeps=2_000, thermalization=400, seed=77)
    r1 = run_chain(p, lat, mc)
    r2 = run_chain(p, lat, mc)
    assert r1.phi.mean == r2.phi.mean
    assert r1.phi.stderr == r2.phi.stderr
    assert np.array_equal(r1.profile_mean, r2.profile_mean)
    assert r1.acceptance == r2.acceptance
    assert r1.generator == "numpy PCG64"


def test_samples_out_stream():
    beta = 4.0
    p = ModelParams(m=1.0, mu=1.0, lam=1.0, beta=beta)
    lat = LatticeConfig(n_tau=16, beta=beta)
    mc = MCParams(
        sweeps=512, thermalization=100, seed=5, chunk_sweeps=256
    )
    buf = io.StringIO()
    res = run_chain(p, lat, mc, corr_lags=[3, 8], samples_out=buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# phi_bar corr_3 corr_8"
    assert len(lines) == 1 + res.n_measurements
    data = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    np.testing.assert_allclose(data[:, 0].mean(), res.phi.mean, rtol=1e-13)
    np.testing.assert_allclose(data[:, 2].mean(), res.corr[8].mean, rtol=1e-13)
