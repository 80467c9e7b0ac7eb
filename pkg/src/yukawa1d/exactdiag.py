"""Truncated-basis diagonalization of H = (p**2 + m**2 q**2)/2 + (mu + lam q) N.

Basis ordering: (N=0, n=0..n_max) then (N=1, n=0..n_max) with n the
oscillator level.  H is block diagonal in the conserved fermion number,
so the two blocks are diagonalized separately.  That keeps exactly
degenerate cross-sector pairs from mixing in the eigenvectors and gives
every eigenpair an unambiguous sector label.

Thermal traces and Euclidean time-ordered correlators are then plain
spectral sums over the retained eigenpairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .model import INFINITE_BETA, ModelParams

# degeneracy window for ground-state averaging at beta=inf
_DEGENERACY_RTOL = 1e-12


class Statistics(Enum):
    BOSONIC = "bosonic"
    FERMIONIC = "fermionic"


@dataclass(frozen=True)
class TruncatedBasis:
    n_max: int

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def osc_dim(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    label: str

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")


def ladder_down(n_max: int) -> np.ndarray:
    """Lowering operator a on levels 0..n_max: a[n-1, n] = sqrt(n)."""
    a = np.zeros((n_max + 1, n_max + 1))
    ns = np.arange(1, n_max + 1)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def position_operator(basis: TruncatedBasis, params: ModelParams) -> OperatorMatrix:
    """q = (a + a')/sqrt(2m) on the full (two-sector) basis."""
    a = ladder_down(basis.n_max)
    q = (a + a.T) / math.sqrt(2.0 * params.m)
    return OperatorMatrix(np.kron(np.eye(2), q), "q")


def momentum_generator(basis: TruncatedBasis, params: ModelParams) -> OperatorMatrix:
    """-i*p = sqrt(m/2)(a' - a), the real antisymmetric generator."""
    a = ladder_down(basis.n_max)
    g = math.sqrt(params.m / 2.0) * (a.T - a)
    return OperatorMatrix(np.kron(np.eye(2), g), "-ip")


def number_operator(basis: TruncatedBasis) -> OperatorMatrix:
    n_f = np.diag([0.0, 1.0])
    return OperatorMatrix(np.kron(n_f, np.eye(basis.osc_dim)), "N")


def fermion_annihilation(basis: TruncatedBasis) -> OperatorMatrix:
    c2 = np.zeros((2, 2))
    c2[0, 1] = 1.0
    return OperatorMatrix(np.kron(c2, np.eye(basis.osc_dim)), "c")


def fermion_creation(basis: TruncatedBasis) -> OperatorMatrix:
    return OperatorMatrix(fermion_annihilation(basis).matrix.T, "c+")


def _oscillator_block(params: ModelParams, n_max: int) -> np.ndarray:
    # m*(a'a + 1/2): same operator as (p^2 + m^2 q^2)/2, but exact on the
    # truncated basis.  Building it from the truncated p^2 and q^2
    # products corrupts the top diagonal entry (a a' leaks out of the
    # basis), which would spoil the exact free spectrum.
    a = ladder_down(n_max)
    return params.m * (a.T @ a + 0.5 * np.eye(n_max + 1))


def build_hamiltonian(params: ModelParams, n_max: int) -> OperatorMatrix:
    """H on the truncated basis; exactly symmetric and block diagonal in N."""
    basis = TruncatedBasis(n_max)
    osc = _oscillator_block(params, n_max)
    a = ladder_down(n_max)
    q = (a + a.T) / math.sqrt(2.0 * params.m)
    d = basis.osc_dim
    h = np.zeros((2 * d, 2 * d))
    h[:d, :d] = osc
    h[d:, d:] = osc + params.mu * np.eye(d) + params.lam * q
    return OperatorMatrix(h, "H")


@dataclass(frozen=True)
class EigenSystem:
    """Merged eigenpairs of both sectors, energies ascending.

    vectors[:, k] is the eigenvector of energies[k]; sectors[k] is 0
    (empty) or 1 (occupied).  residual_norms[k] = ||H v - E v||.
    """

    energies: np.ndarray
    vectors: np.ndarray
    sectors: np.ndarray
    residual_norms: np.ndarray
    basis: TruncatedBasis
    params: ModelParams

    @property
    def dim(self) -> int:
        return self.energies.shape[0]


def diagonalize(params: ModelParams, n_max: int) -> EigenSystem:
    basis = TruncatedBasis(n_max)
    d = basis.osc_dim
    h = build_hamiltonian(params, n_max).matrix

    evals_b, vecs_b = np.linalg.eigh(h[:d, :d])
    evals_f, vecs_f = np.linalg.eigh(h[d:, d:])

    energies = np.concatenate([evals_b, evals_f])
    sectors = np.concatenate([np.zeros(d, dtype=int), np.ones(d, dtype=int)])
    vectors = np.zeros((2 * d, 2 * d))
    vectors[:d, :d] = vecs_b
    vectors[d:, d:] = vecs_f

    # stable sort keeps the bosonic member first at exact degeneracies
    order = np.argsort(energies, kind="stable")
    energies = energies[order]
    sectors = sectors[order]
    vectors = vectors[:, order]

    resid = np.linalg.norm(h @ vectors - vectors * energies[None, :], axis=0)
    scale = max(np.max(np.abs(energies)), 1.0)
    if np.any(resid > 1e-10 * scale):
        raise RuntimeError(
            f"eigensolver residual {resid.max():.3e} exceeds 1e-10*||H||"
        )
    return EigenSystem(energies, vectors, sectors, resid, basis, params)


def _as_matrix(op) -> np.ndarray:
    if isinstance(op, OperatorMatrix):
        return op.matrix
    return np.asarray(op)


def _ground_indices(es: EigenSystem) -> np.ndarray:
    e0 = es.energies[0]
    tol = _DEGENERACY_RTOL * max(1.0, abs(e0))
    return np.nonzero(es.energies - e0 <= tol)[0]


def thermal_expectation(op, es: EigenSystem, beta: float) -> float:
    """Tr(op e^{-beta H})/Tr(e^{-beta H}) over the retained pairs.

    Energies are shifted by the ground energy before exponentiation, so
    large beta cannot underflow the trace.  beta=inf averages over the
    (possibly degenerate) ground level.
    """
    if es.dim == 0:
        raise ValueError("empty eigensystem")
    mat = _as_matrix(op)
    diag = np.einsum("ij,ij->j", es.vectors, mat @ es.vectors)
    if math.isinf(beta):
        idx = _ground_indices(es)
        return float(np.mean(diag[idx]))
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    w = np.exp(-beta * (es.energies - es.energies[0]))
    return float(w @ diag / w.sum())


def time_ordered_two_point(
    opA,
    opB,
    tau: float,
    es: EigenSystem,
    beta: float,
    statistics: Statistics,
) -> float:
    """Spectral-sum <T A(tau) B(0)> at inverse temperature beta.

    Finite beta needs 0 <= tau <= beta.  At beta=inf any real tau is
    allowed; negative tau swaps the ordering with a fermionic sign when
    statistics is FERMIONIC.  Equal times follow the conventions
    theta(0)=0 (fermionic) and the symmetrized product (bosonic).
    """
    if es.dim == 0:
        raise ValueError("empty eigensystem")
    A = es.vectors.T @ _as_matrix(opA) @ es.vectors
    B = es.vectors.T @ _as_matrix(opB) @ es.vectors
    shifted = es.energies - es.energies[0]

    if math.isinf(beta):
        idx = _ground_indices(es)
        if tau == 0.0:
            if statistics is Statistics.FERMIONIC:
                return -float(np.mean(np.einsum("ij,ji->i", B[idx], A[:, idx])))
            return 0.5 * float(
                np.mean(
                    np.einsum("ij,ji->i", A[idx], B[:, idx])
                    + np.einsum("ij,ji->i", B[idx], A[:, idx])
                )
            )
        if tau > 0.0:
            w = np.exp(-tau * shifted)
            return float(np.mean(np.einsum("ij,j,ji->i", A[idx], w, B[:, idx])))
        sign = -1.0 if statistics is Statistics.FERMIONIC else 1.0
        w = np.exp(tau * shifted)  # tau < 0
        return sign * float(np.mean(np.einsum("ij,j,ji->i", B[idx], w, A[:, idx])))

    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    if not 0.0 <= tau <= beta:
        raise ValueError(f"tau={tau!r} outside [0, beta={beta!r}]")

    z = np.exp(-beta * shifted).sum()
    if tau == 0.0:
        w = np.exp(-beta * shifted)
        ba = np.einsum("i,ij,ji->", w, B, A)
        if statistics is Statistics.FERMIONIC:
            return float(-ba / z)
        ab = np.einsum("i,ij,ji->", w, A, B)
        return float(0.5 * (ab + ba) / z)
    wl = np.exp(-(beta - tau) * shifted)
    wr = np.exp(-tau * shifted)
    num = np.einsum("i,ij,j,ji->", wl, A, wr, B)
    return float(num / z)


@dataclass(frozen=True)
class ConvergenceReport:
    n_max_list: tuple[int, ...]
    values: tuple[float, ...]
    diffs: tuple[float, ...]
    converged: bool
    monotone: bool
    tol: float


def truncation_sweep(
    params: ModelParams,
    beta: float,
    observable: Callable[[EigenSystem], float],
    n_max_list: Sequence[int],
    tol: float = 1e-8,
) -> ConvergenceReport:
    """Evaluate observable(EigenSystem) along ascending truncations.

    converged means the last successive difference is below tol;
    monotone means the |differences| never grow along the sweep.  beta
    is accepted for the caller's bookkeeping; the observable closure is
    responsible for actually using it.
    """
    ns = list(n_max_list)
    if len(ns) < 2:
        raise ValueError("n_max_list needs at least two entries")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_max_list must be strictly ascending")
    vals = [float(observable(diagonalize(params, n))) for n in ns]
    diffs = [b - a for a, b in zip(vals, vals[1:])]
    absd = [abs(d) for d in diffs]
    converged = absd[-1] <= tol
    monotone = all(b <= a for a, b in zip(absd, absd[1:]))
    return ConvergenceReport(
        n_max_list=tuple(ns),
        values=tuple(vals),
        diffs=tuple(diffs),
        converged=converged,
        monotone=monotone,
        tol=tol,
    )
