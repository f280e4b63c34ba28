"""Branch counting for N two-outcome measurements.

Exact distribution of the number of "up" records r, its moments computed two
ways (direct summation and the generating-function operator (p d/dp)^m
applied to (p+q)^N), literal enumeration of all 2^N branch sequences for
small N, and a Monte Carlo simulation of universes recording their outcomes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

MAX_ENUMERATION_N = 20
LOG_SPACE_THRESHOLD = 1000
MAX_MOMENT_ORDER = 4


@dataclass(frozen=True)
class TwoStateWeights:
    p: float
    q: float | None = None

    def __post_init__(self):
        q = 1.0 - self.p if self.q is None else self.q
        object.__setattr__(self, "q", q)
        if self.p < 0 or q < 0 or abs(self.p + q - 1.0) > 1e-12:
            raise ValueError(f"invalid weights p={self.p}, q={q}: need p, q >= 0 and p + q = 1")

    def swapped(self) -> "TwoStateWeights":
        return TwoStateWeights(self.q, self.p)


@dataclass(frozen=True, eq=False)
class BranchDistribution:
    N: int
    probs: np.ndarray
    mean_f: float
    var_f: float
    central_moments: tuple[float, float, float, float]  # orders 1..4 of f = r/N

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.N + 1) / self.N

    def tail_mass(self, p: float, eps: float) -> float:
        """Mass of branches whose frequency misses p by more than eps."""
        return float(self.probs[np.abs(self.frequencies - p) > eps].sum())


def _check_n(N):
    if not 1 <= N <= 10 ** 6:
        raise ValueError(f"N must lie in [1, 1e6], got {N}")


def _log_or_ninf(x):
    return math.log(x) if x > 0 else -math.inf


def branch_probabilities(w: TwoStateWeights, N: int) -> np.ndarray:
    """C(N, r) p^r q^(N-r) for r = 0..N, in log space for moderate N."""
    _check_n(N)
    r = np.arange(N + 1)
    lp, lq = _log_or_ninf(w.p), _log_or_ninf(w.q)
    if N > LOG_SPACE_THRESHOLD:
        # lgamma differences lose ~1e-11 of the mass here; scipy's pmf keeps relative rounding
        return stats.binom.pmf(r, N, w.p)
    log_comb = np.array([math.log(math.comb(N, k)) for k in range(N + 1)])
    with np.errstate(invalid="ignore"):
        # r*log(p) with r = 0 and p = 0 is 0; keep the pair sum symmetric under p <-> q
        up = np.where(r == 0, 0.0, r * lp)
        down = np.where(r == N, 0.0, (N - r) * lq)
    return np.exp(log_comb + (up + down))


def _moments_from_probs(probs, N, p):
    f = np.arange(N + 1) / N
    dev = f - p
    return tuple(float(np.sum(dev ** k * probs)) for k in range(1, MAX_MOMENT_ORDER + 1))


def branch_distribution(w: TwoStateWeights, N: int) -> BranchDistribution:
    probs = branch_probabilities(w, N)
    total = probs.sum()
    if abs(total - 1.0) > 1e-12:
        raise FloatingPointError(f"branch probabilities sum to {total!r}")
    mean_f = float(np.sum(np.arange(N + 1) / N * probs))
    moments = _moments_from_probs(probs, N, w.p)
    return BranchDistribution(N, probs, mean_f, moments[1], moments)


def enumerate_branches(w: TwoStateWeights, N: int) -> np.ndarray:
    """Sum p^r q^(N-r) over every one of the 2^N outcome sequences, grouped by r."""
    if not 1 <= N <= MAX_ENUMERATION_N:
        raise ValueError(f"enumeration is limited to N <= {MAX_ENUMERATION_N}")
    seq = np.arange(2 ** N, dtype=np.uint32)
    ups = np.zeros(seq.size, dtype=np.int64)
    for bit in range(N):
        ups += (seq >> bit) & 1
    weight = np.power(w.p, ups) * np.power(w.q, N - ups)
    return np.bincount(ups, weights=weight, minlength=N + 1)


def raw_moment_by_generating_function(p, N: int, m: int) -> Fraction:
    """<r^m> from (p d/dp)^m (p+q)^N with q held fixed, then p + q = 1.

    The expression is kept as sum_j c_j p^j (p+q)^(N-j); one application of
    p d/dp maps p^j (p+q)^(N-j) to j p^j (p+q)^(N-j) + (N-j) p^(j+1) (p+q)^(N-j-1).
    """
    terms: dict[int, int] = {0: 1}
    for _ in range(m):
        nxt: dict[int, int] = {}
        for j, c in terms.items():
            if j:
                nxt[j] = nxt.get(j, 0) + c * j
            if N - j:
                nxt[j + 1] = nxt.get(j + 1, 0) + c * (N - j)
        terms = nxt
    p = Fraction(p)
    return sum((c * p ** j for j, c in terms.items()), Fraction(0))


def moments_by_generating_function(w: TwoStateWeights, N: int, order: int) -> Fraction:
    """Central moment <(r/N - p)^order> in exact rational arithmetic."""
    _check_n(N)
    if not 1 <= order <= MAX_MOMENT_ORDER:
        raise ValueError(f"moment order must be 1..{MAX_MOMENT_ORDER}, got {order}")
    p = Fraction(w.p)
    total = Fraction(0)
    for k in range(order + 1):
        raw = raw_moment_by_generating_function(p, N, k) if k else Fraction(1)
        total += math.comb(order, k) * raw / Fraction(N) ** k * (-p) ** (order - k)
    return total


@dataclass(frozen=True, eq=False)
class BranchingSimulation:
    N: int
    ups: np.ndarray                 # per-universe count of "up" records
    histogram: np.ndarray           # universes per r
    ks_distance: float

    @property
    def frequencies(self) -> np.ndarray:
        return self.ups / self.N


def simulate_branching(w: TwoStateWeights, N: int, n_universes: int, seed: int = 0,
                       chunk: int = 2 ** 22) -> BranchingSimulation:
    """Each universe records N independent outcomes, "up" with weight p.

    Uniform variates come from a Philox counter-based stream keyed by
    ``seed``, drawn in fixed-size blocks so results do not depend on memory.
    """
    _check_n(N)
    if n_universes < 1000:
        raise ValueError(f"n_universes must be >= 1000, got {n_universes}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    per_block = max(1, chunk // N)
    ups = np.empty(n_universes, dtype=np.int64)
    for start in range(0, n_universes, per_block):
        stop = min(start + per_block, n_universes)
        u = rng.random((stop - start, N))
        ups[start:stop] = np.count_nonzero(u < w.p, axis=1)
    hist = np.bincount(ups, minlength=N + 1)
    exact_cdf = np.cumsum(branch_probabilities(w, N))
    emp_cdf = np.cumsum(hist) / n_universes
    ks = float(np.max(np.abs(emp_cdf - exact_cdf)))
    return BranchingSimulation(N, ups, hist, ks)
