"""Metropolis sampling of the periodic boson line with the fermion traced out.

The number operator commutes with H, so the fermionic trace collapses to
the exact factor w_F = 1 + exp(-a sum_i (mu + lam phi_i)) multiplying
the boson weight e^{-S_B}.  w_F is strictly positive for any real field,
so there is no sign problem and no Grassmann machinery on the lattice.

The sampler does site-by-site Metropolis updates plus one global
constant-shift proposal per sweep.  The shift move targets the zero mode
(the fermion term couples only to sum phi), which otherwise dominates
the autocorrelation time; both moves use symmetric proposals, so
detailed balance is preserved.  All random numbers are drawn up front
per chunk from a seeded PCG64 stream, which makes runs reproducible and
lets tests replay the kernel arithmetic step by step in pure Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .model import ModelParams


@dataclass(frozen=True)
class LatticeConfig:
    n_tau: int
    beta: float

    def __post_init__(self):
        if self.n_tau < 8 or self.n_tau % 2 != 0:
            raise ValueError(
                f"n_tau must be even and >= 8, got {self.n_tau}"
            )
        if math.isinf(self.beta) or not self.beta > 0:
            raise ValueError(f"beta must be finite and positive, got {self.beta!r}")

    @property
    def a(self) -> float:
        return self.beta / self.n_tau


def boson_action(phi: np.ndarray, params: ModelParams, lattice) -> float:
    """Forward-difference action a*sum[ (dphi/a)^2/2 + m^2 phi^2/2 ]
    with periodic wraparound."""
    phi = np.asarray(phi, dtype=float)
    a = lattice.a
    dphi = np.roll(phi, -1) - phi
    return float(
        np.sum(0.5 * dphi * dphi / a + 0.5 * a * params.m**2 * phi * phi)
    )


def _fermion_exponent(phi: np.ndarray, params: ModelParams, lattice) -> float:
    return -lattice.a * (params.mu * len(phi) + params.lam * float(np.sum(phi)))


def log_fermion_weight(phi: np.ndarray, params: ModelParams, lattice) -> float:
    """log(1 + e^t) with t = -a sum(mu + lam phi); stable at any |t|."""
    t = _fermion_exponent(np.asarray(phi, dtype=float), params, lattice)
    if t > 0:
        return t + math.log1p(math.exp(-t))
    return math.log1p(math.exp(t))


def fermion_weight(phi: np.ndarray, params: ModelParams, lattice) -> float:
    """w_F = 1 + e^t, overflow-guarded; may return inf for extreme fields."""
    lw = log_fermion_weight(phi, params, lattice)
    if lw > 709.0:
        return math.inf
    return math.exp(lw)


@numba.njit(cache=True)
def _softplus(t):
    if t > 0.0:
        return t + math.log1p(math.exp(-t))
    return math.log1p(math.exp(t))


@numba.njit(cache=True)
def _run_sweeps(
    phi,
    a,
    msq,
    mu,
    lam,
    step,
    shift_step,
    site_prop,
    site_acc,
    shift_prop,
    shift_acc,
    use_shift,
    meas_every,
    meas_out,
):
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
            logr = -(dkin + dpot) + _softplus(tn) - _softplus(t)
            if logr >= 0.0 or site_acc[s, i] < math.exp(logr):
                phi[i] = new
                t = tn
                accepted += 1
        if use_shift:
            d = shift_step * shift_prop[s]
            ssum = 0.0
            for i in range(n):
                ssum += phi[i]
            # kinetic term is shift invariant; only mass and fermion terms move
            ds = a * msq * (d * ssum + 0.5 * n * d * d)
            tn = t - a * lam * n * d
            logr = -ds + _softplus(tn) - _softplus(t)
            if logr >= 0.0 or shift_acc[s] < math.exp(logr):
                for i in range(n):
                    phi[i] += d
                shifts_accepted += 1
        if meas_every > 0 and (s + 1) % meas_every == 0:
            for i in range(n):
                meas_out[m_idx, i] = phi[i]
            m_idx += 1
    return accepted, shifts_accepted


def metropolis_sweep(
    phi: np.ndarray,
    params: ModelParams,
    lattice,
    step: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """One in-place site-by-site pass; returns (phi, acceptance rate)."""
    if not step > 0:
        raise ValueError(f"step must be positive, got {step!r}")
    phi = np.ascontiguousarray(phi, dtype=float)
    n = phi.shape[0]
    site_prop = rng.uniform(-1.0, 1.0, size=(1, n))
    site_acc = rng.random(size=(1, n))
    acc, _ = _run_sweeps(
        phi,
        lattice.a,
        params.m**2,
        params.mu,
        params.lam,
        step,
        0.0,
        site_prop,
        site_acc,
        np.zeros(1),
        np.ones(1),
        False,
        0,
        np.empty((0, n)),
    )
    return phi, acc / n


@dataclass(frozen=True)
class MCParams:
    """Sampler schedule.  sweeps and chunk_sweeps must be multiples of
    measure_every so measurement spacing stays uniform across chunks."""

    sweeps: int
    thermalization: int = 20_000
    measure_every: int = 4
    step: float = 0.5
    shift_step: float = 0.6
    seed: int = 0
    tune: bool = True
    use_shift_move: bool = True
    chunk_sweeps: int = 10_000

    def __post_init__(self):
        if self.sweeps < 1 or self.thermalization < 1:
            raise ValueError("sweeps and thermalization must be positive")
        if self.measure_every < 1:
            raise ValueError("measure_every must be >= 1")
        if self.sweeps % self.measure_every != 0:
            raise ValueError("sweeps must be a multiple of measure_every")
        if self.chunk_sweeps % self.measure_every != 0:
            raise ValueError("chunk_sweeps must be a multiple of measure_every")
        if not self.step > 0 or not self.shift_step > 0:
            raise ValueError("proposal steps must be positive")
        if self.sweeps // self.measure_every < 64:
            raise ValueError("need at least 64 measurements for blocking")


@dataclass(frozen=True)
class ChainEstimate:
    mean: float
    stderr: float
    tau_int: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.stderr < 0 or self.n_samples <= 0:
            raise ValueError("stderr must be >= 0 and n_samples > 0")


def blocking_estimate(series, seed: int, min_blocks: int = 32) -> ChainEstimate:
    """Mean and stderr by blocking with dyadic block-size growth.

    The stderr is the largest across block sizes (the plateau value once
    blocks exceed the autocorrelation time); tau_int is inferred from
    the ratio to the naive single-sample error, in units of the
    measurement spacing.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 2 * min_blocks:
        raise ValueError(f"need at least {2 * min_blocks} samples, got {n}")
    mean = float(x.mean())
    se_naive = float(x.std(ddof=1)) / math.sqrt(n)
    se = se_naive
    size = 1
    while n // (2 * size) >= min_blocks:
        size *= 2
        nb = n // size
        bm = x[: nb * size].reshape(nb, size).mean(axis=1)
        se = max(se, float(bm.std(ddof=1)) / math.sqrt(nb))
    tau = 0.5 * (se / se_naive) ** 2 if se_naive > 0 else 0.5
    return ChainEstimate(
        mean=mean, stderr=se, tau_int=tau, n_samples=n, seed=seed
    )


@dataclass(frozen=True)
class ChainResult:
    phi: ChainEstimate
    corr: dict[int, ChainEstimate]
    profile_lags: np.ndarray
    profile_mean: np.ndarray
    profile_stderr: np.ndarray
    acceptance: float
    shift_acceptance: float
    step: float
    shift_step: float
    thermalized: bool
    n_measurements: int
    seed: int
    generator: str


def _drift_ok(phibar: np.ndarray, seed: int) -> bool:
    half = phibar.size // 2
    if half < 64:
        return True
    e1 = blocking_estimate(phibar[:half], seed)
    e2 = blocking_estimate(phibar[half:], seed)
    denom = math.hypot(e1.stderr, e2.stderr)
    if denom == 0.0:
        return True
    return abs(e1.mean - e2.mean) / denom < 4.0


def run_chain(
    params: ModelParams,
    lattice: LatticeConfig,
    mc: MCParams,
    corr_lags=None,
    samples_out=None,
) -> ChainResult:
    """Thermalize (tuning the steps to ~50% / ~40% acceptance, then
    freezing them), run mc.sweeps measurement sweeps, and reduce.

    Returns blocked estimates for phi-bar and for the translation
    averaged correlator at the requested lags (default beta/2), plus the
    full correlator profile with per-chunk scatter errors.  samples_out,
    if given, receives one plain-text line per measurement.
    """
    if params.zero_temperature:
        raise ValueError("lattice sampling needs finite beta")
    if abs(lattice.beta - params.beta) > 1e-12 * params.beta:
        raise ValueError(
            f"lattice beta {lattice.beta!r} does not match params beta "
            f"{params.beta!r}"
        )
    n = lattice.n_tau
    a = lattice.a
    msq = params.m**2
    lags = sorted(set(int(l) % n for l in (corr_lags or [n // 2])))

    rng = np.random.default_rng(np.random.SeedSequence(mc.seed))
    phi = np.zeros(n)
    step = mc.step
    shift_step = mc.shift_step

    def drive(n_sweeps, meas_every, meas_out, cur_step, cur_shift):
        site_prop = rng.uniform(-1.0, 1.0, size=(n_sweeps, n))
        site_acc = rng.random(size=(n_sweeps, n))
        shift_prop = rng.uniform(-1.0, 1.0, size=n_sweeps)
        shift_acc = rng.random(size=n_sweeps)
        return _run_sweeps(
            phi, a, msq, params.mu, params.lam, cur_step, cur_shift,
            site_prop, site_acc, shift_prop, shift_acc,
            mc.use_shift_move, meas_every, meas_out,
        )

    # thermalization with step tuning in short blocks
    no_meas = np.empty((0, n))
    done = 0
    tune_block = 200
    while done < mc.thermalization:
        nb = min(tune_block, mc.thermalization - done)
        acc, sacc = drive(nb, 0, no_meas, step, shift_step)
        if mc.tune:
            rate = acc / (nb * n)
            step = min(max(step * math.exp(1.2 * (rate - 0.5)), 1e-3), 1e3)
            if mc.use_shift_move:
                srate = sacc / nb
                shift_step = min(
                    max(shift_step * math.exp(1.2 * (srate - 0.4)), 1e-3), 1e3
                )
        done += nb

    n_meas = mc.sweeps // mc.measure_every
    phibar = np.empty(n_meas)
    corr_series = {l: np.empty(n_meas) for l in lags}
    prof_chunks = []
    prof_weights = []
    acc_tot = 0
    shift_tot = 0

    if samples_out is not None:
        cols = " ".join(f"corr_{l}" for l in lags)
        samples_out.write(f"# phi_bar {cols}\n")

    done = 0
    m_done = 0
    while done < mc.sweeps:
        nb = min(mc.chunk_sweeps, mc.sweeps - done)
        rows = nb // mc.measure_every
        buf = np.empty((rows, n))
        acc, sacc = drive(nb, mc.measure_every, buf, step, shift_step)
        acc_tot += acc
        shift_tot += sacc

        f = np.fft.rfft(buf, axis=1)
        prof_rows = np.fft.irfft(f * f.conj(), n=n, axis=1) / n
        pb = buf.mean(axis=1)
        phibar[m_done : m_done + rows] = pb
        for l in lags:
            corr_series[l][m_done : m_done + rows] = prof_rows[:, l]
        prof_chunks.append(prof_rows.mean(axis=0))
        prof_weights.append(rows)

        if samples_out is not None:
            for r in range(rows):
                vals = " ".join(f"{prof_rows[r, l]:.17g}" for l in lags)
                samples_out.write(f"{pb[r]:.17g} {vals}\n")

        done += nb
        m_done += rows

    prof = np.stack(prof_chunks)
    w = np.asarray(prof_weights, dtype=float)
    w /= w.sum()
    prof_mean = w @ prof
    if prof.shape[0] >= 2:
        # chunk means as blocks; chunks span >> tau_int so scatter is honest
        var = np.sum(
            w[:, None] * (prof - prof_mean[None, :]) ** 2, axis=0
        ) / (1.0 - np.sum(w**2))
        prof_stderr = np.sqrt(var * np.sum(w**2))
    else:
        prof_stderr = np.full(n, np.nan)

    return ChainResult(
        phi=blocking_estimate(phibar, mc.seed),
        corr={l: blocking_estimate(corr_series[l], mc.seed) for l in lags},
        profile_lags=np.arange(n),
        profile_mean=prof_mean,
        profile_stderr=prof_stderr,
        acceptance=acc_tot / (mc.sweeps * n),
        shift_acceptance=(shift_tot / mc.sweeps) if mc.use_shift_move else 0.0,
        step=step,
        shift_step=shift_step,
        thermalized=_drift_ok(phibar, mc.seed),
        n_measurements=n_meas,
        seed=mc.seed,
        generator="numpy PCG64",
    )
