"""General j-point fermion-loop engine at finite temperature.

A single loop with ordered bosonic grid insertions p_1..p_j is evaluated
through the winding expansion: the fermionic frequency sum becomes a sum
over images n >= 1 weighted by (-x)^n, x = e^{-mu beta}, and each image
integral is closed below the real axis by residues.  The pole positions
are the cumulative momentum sums q_r = p_1 + .. + p_r (q_0 = 0); on the
bosonic grid the phase e^{i q_r beta n} is exactly 1, so everything
reduces to rational functions of the grid values plus powers of (beta n)
from repeated poles.

Normalization: the stored value for all-zero momenta is the real-space
connected correlator of j number operators times beta^j,

    -beta^j sum_{n>0} n^{j-1} (-x)^n,

i.e. the j-th cumulant of the occupation number times beta^j.  A single
ordering therefore carries the (j-1)! cyclic-ordering factor folded in;
permutation_symmetrized_loop sums orderings on top of that, matching
the convention of the cancellation identities below.

With all partial sums distinct the residues cancel exactly for j >= 2
(sum of residues of a rational function falling off like k^-2), giving
the fast path.  Degenerate partial sums produce higher-order poles whose
residues come from a Leibniz expansion with log-derivative recurrences;
those are the only nonzero single loops, and they carry factors i**t
that make unbalanced orderings purely imaginary.  Physical combinations
(symmetrized sums, all-zero momenta) are real.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from itertools import permutations
from typing import Iterator, Sequence

from .model import (
    DEFAULT_POLICY,
    ConsistencyError,
    FrequencyKind,
    MatsubaraFrequency,
    NumericPolicy,
    fermi_occupation,
)

MAX_INSERTIONS = 10  # Bell-number / factorial guard


@dataclass(frozen=True)
class LoopSpec:
    """One ordered connected loop: bosonic grid momenta summing to zero."""

    momenta: tuple[MatsubaraFrequency, ...]
    mu: float
    beta: float
    max_winding: int

    def __post_init__(self):
        if len(self.momenta) < 1:
            raise ValueError("loop needs at least one insertion")
        if len(self.momenta) > MAX_INSERTIONS:
            raise ValueError(
                f"loop capped at j<={MAX_INSERTIONS} insertions, "
                f"got {len(self.momenta)}"
            )
        for p in self.momenta:
            if not isinstance(p, MatsubaraFrequency):
                raise ValueError(f"momenta must be MatsubaraFrequency, got {p!r}")
            if p.kind is not FrequencyKind.BOSONIC:
                raise ValueError("loop insertions carry bosonic grid momenta")
            if p.beta != self.beta:
                raise ValueError(
                    f"momentum grid beta {p.beta!r} does not match loop beta "
                    f"{self.beta!r}"
                )
        if sum(p.index for p in self.momenta) != 0:
            raise ValueError(
                "momenta must sum to zero: the overall momentum conservation "
                "delta function is not satisfied"
            )
        if math.isinf(self.beta) or not self.beta > 0:
            raise ValueError("loop expansion needs finite positive beta")
        if self.max_winding < 1:
            raise ValueError(f"max_winding must be >= 1, got {self.max_winding}")

    @property
    def j(self) -> int:
        return len(self.momenta)


@dataclass(frozen=True)
class LoopResult:
    value: complex
    winding_breakdown: tuple[complex, ...]
    degeneracy_profile: tuple[int, ...]
    tail_bound: float
    fast_path: bool


def _group_poles(indices: Sequence[int]) -> list[tuple[int, int]]:
    """Cumulative integer sums grouped by value: [(c, multiplicity), ...].

    Grouping is by exact grid index, never floating comparison.
    """
    cum = []
    s = 0
    cum.append(0)
    for idx in indices[:-1]:
        s += idx
        cum.append(s)
    counts: dict[int, int] = {}
    for c in cum:
        counts[c] = counts.get(c, 0) + 1
    return sorted(counts.items())


def _rational_derivatives(diffs: Sequence[float], order: int) -> list[float]:
    """Derivatives at 0 of R(w) = prod_a 1/(w + d_a), up to given order.

    Uses R' = R (ln R)' with (ln R)^(k)(0) = sum_a (-1)^k (k-1)!/d_a^k.
    """
    r0 = 1.0
    for d in diffs:
        r0 /= d
    r = [r0]
    if order == 0:
        return r
    u = [0.0]  # placeholder so u[k] is the k-th log derivative
    for k in range(1, order + 1):
        u.append(
            sum((-1.0) ** k * math.factorial(k - 1) / d**k for d in diffs)
        )
    for k in range(order):
        # r[k+1] = sum_i C(k,i) r[i] u[k+1-i]
        r.append(
            math.fsum(math.comb(k, i) * r[i] * u[k + 1 - i] for i in range(k + 1))
        )
    return r


def connected_loop(
    spec: LoopSpec, policy: NumericPolicy = DEFAULT_POLICY
) -> LoopResult:
    if not spec.mu > 0:
        raise ValueError("winding expansion needs mu > 0")
    j = spec.j
    beta = spec.beta
    groups = _group_poles([p.index for p in spec.momenta])
    profile = tuple(sorted((s for _, s in groups), reverse=True))

    if j >= 2 and all(s == 1 for _, s in groups):
        # all poles simple and the integrand falls off like k^-2 or
        # faster: the residues sum to zero identically, winding by winding
        return LoopResult(
            value=0.0 + 0.0j,
            winding_breakdown=(),
            degeneracy_profile=profile,
            tail_bound=0.0,
            fast_path=True,
        )

    x = math.exp(-spec.mu * beta)
    pref = beta * math.factorial(j - 1)
    # per-group data: multiplicity s, derivatives of the spectator factor
    group_data = []
    all_c = []
    for c, s in groups:
        all_c.extend([c] * s)
    for c, s in groups:
        diffs = [
            2.0 * math.pi * (cc - c) / beta for cc in all_c if cc != c
        ]
        rders = _rational_derivatives(diffs, s - 1)
        group_data.append((c, s, rders))

    # |A_n| <= P(n) with positive coefficients; used for the tail bound
    deg = max(s for _, s in groups) - 1
    poly_bound = [0.0] * (deg + 1)
    for _, s, rders in group_data:
        inv = 1.0 / math.factorial(s - 1)
        for t in range(s):
            poly_bound[t] += (
                inv * math.comb(s - 1, t) * beta**t * abs(rders[s - 1 - t])
            )

    phase = (1j) ** ((j - 1) % 4)
    breakdown: list[complex] = []
    tail = math.inf
    for n in range(1, spec.max_winding + 1):
        a_n = 0.0 + 0.0j
        for _, s, rders in group_data:
            inv = 1.0 / math.factorial(s - 1)
            term = 0.0 + 0.0j
            for t in range(s):
                term += (
                    math.comb(s - 1, t)
                    * (-1j * beta * n) ** t
                    * rders[s - 1 - t]
                )
            a_n += inv * term
        breakdown.append(-pref * (-x) ** n * phase * a_n)

        p_next = math.fsum(b * (n + 1) ** d for d, b in enumerate(poly_bound))
        rho = x * ((n + 2) / (n + 1)) ** deg
        if rho < 1.0:
            tail = pref * x ** (n + 1) * p_next / (1.0 - rho)
            if tail <= policy.abs_tol:
                break
    if tail > policy.abs_tol:
        raise ValueError(
            f"max_winding={spec.max_winding} only reaches winding tail bound "
            f"{tail:.3e}, above abs_tol={policy.abs_tol:.3e}"
        )
    value = complex(
        math.fsum(b.real for b in breakdown), math.fsum(b.imag for b in breakdown)
    )
    return LoopResult(
        value=value,
        winding_breakdown=tuple(breakdown),
        degeneracy_profile=profile,
        tail_bound=tail,
        fast_path=False,
    )


def _falling_polylog(order: int, y: float) -> float:
    """Li_{-order}(y) for order >= 0 via the rational closed form
    P_k(y)/(1-y)^(k+1), with integer-coefficient P_k built by the
    recurrence P_{k+1} = y((1-y)P_k' + (k+1)P_k), P_0 = y."""
    if order < 0:
        raise ValueError("nonpositive-order polylog only")
    coeffs = [0, 1]  # P_0(y) = y, ascending powers
    for k in range(order):
        deriv = [i * c for i, c in enumerate(coeffs)][1:] + [0]
        new = [0] * (len(coeffs) + 1)
        for i, c in enumerate(deriv):
            new[i] += c
            new[i + 1] -= c
        for i, c in enumerate(coeffs):
            new[i] += (k + 1) * c
        while len(new) > 1 and new[-1] == 0:
            new.pop()
        coeffs = [0] + [int(c) for c in new]  # multiply by y
    p = 0.0
    for c in reversed(coeffs):
        p = p * y + c
    return p / (1.0 - y) ** (order + 1)


def connected_loop_zero_momenta(
    j: int,
    mu: float,
    beta: float,
    policy: NumericPolicy = DEFAULT_POLICY,
    max_winding: int | None = None,
) -> float:
    """All-zero-momentum connected loop: -beta^j sum_{n>0} n^{j-1}(-x)^n.

    Evaluated by direct alternating summation with a tail bound and,
    independently, by the rational polylogarithm closed form; the two
    must agree to abs_tol (on the dimensionless sum).
    """
    if j < 1:
        raise ValueError(f"need j >= 1, got {j}")
    if math.isinf(beta) or not beta > 0:
        raise ValueError("loop expansion needs finite positive beta")
    if not mu * beta > 0:
        raise ValueError("need mu*beta > 0 for a decaying winding expansion")
    if max_winding is None:
        max_winding = policy.winding_cutoff

    x = math.exp(-mu * beta)
    s = 0.0
    tail = math.inf
    for n in range(1, max_winding + 1):
        s += n ** (j - 1) * (-x) ** n
        rho = x * ((n + 2) / (n + 1)) ** (j - 1)
        if rho < 1.0:
            tail = x ** (n + 1) * (n + 1) ** (j - 1) / (1.0 - rho)
            if tail <= policy.abs_tol:
                break
    if tail > policy.abs_tol:
        raise ValueError(
            f"max_winding={max_winding} only reaches tail bound {tail:.3e}, "
            f"above abs_tol={policy.abs_tol:.3e}"
        )
    closed = _falling_polylog(j - 1, -x)
    if abs(s - closed) > policy.abs_tol + tail:
        raise ConsistencyError(
            f"zero-momentum loop routes disagree at j={j}: series {s!r} vs "
            f"polylog {closed!r}"
        )
    return -(beta**j) * closed


def permutation_symmetrized_loop(
    j: int,
    momentum_multiset: Sequence[MatsubaraFrequency],
    mu: float,
    beta: float,
    policy: NumericPolicy = DEFAULT_POLICY,
    max_winding: int | None = None,
) -> float:
    """Sum of connected_loop over the (j-1)! cyclic orderings.

    The first momentum is pinned and the rest permuted; repeated momenta
    still contribute one term per permutation, so the all-zero case is
    (j-1)! times the single-ordering value.  The result is real: the
    imaginary parts of mirror-image orderings cancel pairwise.
    """
    moms = tuple(momentum_multiset)
    if len(moms) != j:
        raise ValueError(f"expected {j} momenta, got {len(moms)}")
    if max_winding is None:
        max_winding = policy.winding_cutoff
    total = 0.0 + 0.0j
    scale = 0.0
    for rest in permutations(moms[1:]):
        spec = LoopSpec(
            momenta=(moms[0],) + rest, mu=mu, beta=beta, max_winding=max_winding
        )
        v = connected_loop(spec, policy).value
        total += v
        scale = max(scale, abs(v))
    if abs(total.imag) > policy.abs_tol * max(1.0, scale):
        raise ConsistencyError(
            f"symmetrized loop has a residual imaginary part {total.imag!r}"
        )
    return total.real


def _set_partitions(j: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length j in lexicographic order."""
    a = [0] * j

    def rec(k: int, mx: int) -> Iterator[tuple[int, ...]]:
        if k == j:
            yield tuple(a)
            return
        for v in range(mx + 2):
            a[k] = v
            yield from rec(k + 1, max(mx, v))

    yield from rec(1, 0)


def full_number_correlator(
    j: int,
    mu: float,
    beta: float,
    policy: NumericPolicy = DEFAULT_POLICY,
) -> float:
    """Equal-weight j-point number-operator correlator, assembled from
    connected loops over all set partitions of the insertion points.

    Each block of size s contributes the real-space connected s-point
    factor connected_loop_zero_momenta(s)/beta**s (its (s-1)! cyclic
    orderings are already folded into that value).  The assembled sum
    telescopes to the occupation itself and is asserted against
    fermi_occupation before being returned.
    """
    if j < 1:
        raise ValueError(f"need j >= 1, got {j}")
    if j > MAX_INSERTIONS:
        raise ValueError(
            f"set-partition enumeration capped at j<={MAX_INSERTIONS}, got {j}"
        )
    cfac: dict[int, float] = {}
    for s in range(1, j + 1):
        cfac[s] = connected_loop_zero_momenta(s, mu, beta, policy) / beta**s

    contributions = []
    for rgs in _set_partitions(j):
        sizes: dict[int, int] = {}
        for label in rgs:
            sizes[label] = sizes.get(label, 0) + 1
        prod = 1.0
        for s in sizes.values():
            prod *= cfac[s]
        contributions.append(prod)
    value = math.fsum(contributions)

    target = fermi_occupation(mu, beta)
    if abs(value - target) > policy.abs_tol:
        raise ConsistencyError(
            f"j={j} number correlator {value!r} does not telescope to the "
            f"occupation {target!r}"
        )
    return value


@dataclass(frozen=True)
class TelescopingReport:
    j: int
    mu: float
    beta: float
    value: float
    target: float
    residual: float
    tail_bound: float
    n_terms: int
    partial_sums: tuple[float, ...]
    tolerance: float
    passed: bool


def telescoping_check(
    j: int,
    mu: float,
    beta: float,
    policy: NumericPolicy = DEFAULT_POLICY,
    max_winding: int | None = None,
    tolerance: float = 1e-12,
) -> TelescopingReport:
    """Term-by-term verification of the induction step

        sum_{n>0} (-x)^n [n^{j-1} + f((n+1)^{j-1} - n^{j-1})] = -f

    with f = x/(1+x): the j-point loop plus the boundary piece collapses
    to minus the occupation, independent of j."""
    if j < 2:
        raise ValueError(f"telescoping needs j >= 2, got {j}")
    if math.isinf(beta) or not mu * beta > 0:
        raise ValueError("need finite beta with mu*beta > 0")
    if max_winding is None:
        max_winding = policy.winding_cutoff

    x = math.exp(-mu * beta)
    f = fermi_occupation(mu, beta)
    partials = []
    s = 0.0
    tail = math.inf
    target_tail = min(policy.abs_tol, tolerance / 10.0)
    for n in range(1, max_winding + 1):
        term = (-x) ** n * (
            n ** (j - 1) + f * ((n + 1) ** (j - 1) - n ** (j - 1))
        )
        s += term
        partials.append(s)
        # |term_n| <= x^n (n+1)^{j-1}
        rho = x * ((n + 3) / (n + 2)) ** (j - 1)
        if rho < 1.0:
            tail = x ** (n + 1) * (n + 2) ** (j - 1) / (1.0 - rho)
            if tail <= target_tail:
                break
    residual = abs(s - (-f))
    return TelescopingReport(
        j=j,
        mu=mu,
        beta=beta,
        value=s,
        target=-f,
        residual=residual,
        tail_bound=tail,
        n_terms=len(partials),
        partial_sums=tuple(partials),
        tolerance=tolerance,
        passed=residual <= tolerance and tail <= target_tail,
    )
