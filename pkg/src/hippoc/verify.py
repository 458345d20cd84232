"""Desk-scale verification of every quantitative bound the tests rely on.

Two independent routes are kept for each measure claim: an exact route
(closed forms, full enumeration, or integer dynamic programming) and a
seeded Monte Carlo route with Wilson confidence intervals. Neither route
is allowed to borrow the other's arithmetic.

Moment identities
-----------------
For X_i = Y_i - p centred Bernoulli and S_n = sum X_i, expanding S_n^4 and
dropping the odd-moment terms leaves

    E(S_n^4) = n E(X_1^4) + 3 n (n-1) E(X_1^2)^2,

with E(X_1^4) = p(1-p)((1-p)^3 + p^3) <= 1/2 and E(X_1^2) = p(1-p). The
brute-force twin enumerates all 2^n outcomes literally.

Exact union measure
-------------------
The deviation events at successive checkpoints depend on the bit sequence
only through its running one-count, which is Markov across checkpoints
with binomial increments. The DP therefore tracks, per surviving count, the
number of length-N(b) bit strings that have fired at no checkpoint so far;
the union's measure is one minus the surviving probability mass. All
weights are integers (path counts and binomial rows); division happens
once, at the end.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import bitstream
from .bitstream import substream_seed
from .convert import DEFAULT_FAMILY, OracleTestFamily, _diagonal_from_summary
from .errors import DegenerateP, InvalidInterval, PrefixTooShort, TooLarge, ZeroTrials
from .exactnum import RealParam
from .randtests import (
    CheckpointSummary,
    checkpoint_size,
    slln_bound,
)

# two-sided 99% normal quantile for the Wilson interval
_Z99 = 2.5758293035489004

_BRUTE_FORCE_LIMIT = 14
_UNION_LEVEL_LIMIT = 5
_CHEBYSHEV_LIMIT = 10**6
_I64_GUARD = 1 << 62


@dataclass(frozen=True)
class MomentReport:
    quantity: str
    n: int | None
    p: Fraction
    formula_value: Fraction
    brute_force_value: Fraction | None = None
    bound_value: Fraction | None = None
    k: int | None = None

    @property
    def bound_satisfied(self) -> bool | None:
        if self.bound_value is None:
            return None
        return self.formula_value <= self.bound_value


@dataclass(frozen=True)
class MeasureEstimate:
    method: str  # "exact-dp" | "monte-carlo"
    bound: Fraction
    satisfied: bool
    value: Fraction  # exact measure, or fires/trials for Monte Carlo
    trials: int | None = None
    fires: int | None = None
    seed: int | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    ci_method: str | None = None


def fourth_central_moment(p) -> Fraction:
    """E[(Y - p)^4] for a Bernoulli(p) bit: p(1-p)((1-p)^3 + p^3)."""
    p = Fraction(p)
    q = 1 - p
    return p * q * (q**3 + p**3)


def moment_s4(n: int, p) -> MomentReport:
    """Exact E(S_n^4) for the centred sum by the closed form."""
    p = Fraction(p)
    if n < 1 or not 0 <= p <= 1:
        raise ValueError("need n >= 1 and p in [0, 1]")
    kp = fourth_central_moment(p)
    var = p * (1 - p)
    value = n * kp + 3 * n * (n - 1) * var**2
    return MomentReport(quantity="s4_expectation", n=n, p=p, formula_value=value)


def brute_force_s4(n: int, p) -> Fraction:
    """Exact E(S_n^4) by literal enumeration of all 2^n outcomes."""
    p = Fraction(p)
    if n > _BRUTE_FORCE_LIMIT:
        raise TooLarge(f"brute force caps at n = {_BRUTE_FORCE_LIMIT}")
    if n < 1 or not 0 <= p <= 1:
        raise ValueError("need n >= 1 and p in [0, 1]")
    q = 1 - p
    total = Fraction(0)
    for outcome in range(1 << n):
        prob = Fraction(1)
        s = Fraction(0)
        for i in range(n):
            if (outcome >> i) & 1:
                prob *= p
                s += 1 - p
            else:
                prob *= q
                s -= p
        total += prob * s**4
    return total


def variance_report(p) -> MomentReport:
    p = Fraction(p)
    return MomentReport(
        quantity="variance",
        n=None,
        p=p,
        formula_value=p * (1 - p),
        bound_value=Fraction(1, 4),
    )


def kp_report(p) -> MomentReport:
    return MomentReport(
        quantity="fourth_central_moment",
        n=None,
        p=Fraction(p),
        formula_value=fourth_central_moment(p),
        bound_value=Fraction(1, 2),
    )


@lru_cache(maxsize=64)
def _binomial_pmf(n: int, p: Fraction) -> tuple[Fraction, ...]:
    # iterative exact pmf: pmf(c+1) = pmf(c) * (n-c)/(c+1) * p/(1-p)
    q = 1 - p
    if p == 0:
        return (Fraction(1),) + (Fraction(0),) * n
    if p == 1:
        return (Fraction(0),) * n + (Fraction(1),)
    ratio = p / q
    pmf = [q**n]
    for c in range(n):
        pmf.append(pmf[-1] * ratio * Fraction(n - c, c + 1))
    return tuple(pmf)


def chebyshev_check(n: int, p, k: int) -> MomentReport:
    """Exact P(|avg - p| >= k * sigma / sqrt(n)) against the 1/k^2 bound.

    The threshold involves sqrt(n), so the comparison is squared first:
    count c fires iff (c - n p)^2 >= k^2 p(1-p) n, an exact rational test.
    """
    p = Fraction(p)
    if p in (0, 1):
        raise DegenerateP("sigma = 0 when p is 0 or 1")
    if k < 1 or n < 1:
        raise ValueError("need n >= 1 and k >= 1")
    if n > _CHEBYSHEV_LIMIT:
        raise TooLarge(f"exact tail caps at n = {_CHEBYSHEV_LIMIT}")
    pmf = _binomial_pmf(n, p)
    rhs = k * k * p * (1 - p) * n
    tail = Fraction(0)
    for c in range(n + 1):
        if (c - n * p) ** 2 >= rhs:
            tail += pmf[c]
    return MomentReport(
        quantity="chebyshev_tail",
        n=n,
        p=p,
        k=k,
        formula_value=tail,
        bound_value=Fraction(1, k * k),
    )


# ---------------------------------------------------------------------------
# Exact truncated union measure by integer DP


@lru_cache(maxsize=16)
def _binom_row(n: int) -> tuple[int, ...]:
    row = [1]
    for j in range(n):
        row.append(row[-1] * (n - j) // (j + 1))
    return tuple(row)


def _fires(count: int, b: int, num: int, den: int) -> bool:
    # |count/N - num/den| >= 2^-b  in integers
    size = checkpoint_size(b)
    return abs(count * den - num * size) << b >= den * size


def exact_union_measure(p, d: int, b_max: int) -> MeasureEstimate:
    """Exact probability that some checkpoint level in [d, b_max] deviates
    from p by at least its threshold, under independent Bernoulli(p) bits."""
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if not 1 <= d <= b_max:
        raise ValueError("need 1 <= d <= b_max")
    if b_max > _UNION_LEVEL_LIMIT:
        raise TooLarge(f"exact DP caps at b_max = {_UNION_LEVEL_LIMIT}")
    num, den = p.numerator, p.denominator

    size = checkpoint_size(d)
    surviving = list(_binom_row(size))  # paths per one-count, none fired yet
    for k in range(size + 1):
        if _fires(k, d, num, den):
            surviving[k] = 0
    for b in range(d + 1, b_max + 1):
        delta = checkpoint_size(b) - size
        size = checkpoint_size(b)
        row = _binom_row(delta)
        nxt = [0] * (size + 1)
        for k, ways in enumerate(surviving):
            if not ways:
                continue
            for j, r in enumerate(row):
                nxt[k + j] += ways * r
        for k in range(size + 1):
            if nxt[k] and _fires(k, b, num, den):
                nxt[k] = 0
        surviving = nxt

    comp = den - num
    weight = 0
    # sum surviving[k] * num^k * (den-num)^(size-k) without repeated pow
    pow_one = 1
    pow_zero = comp**size if comp else 0
    if comp == 0:
        weight = surviving[size] * num**size
    elif num == 0:
        weight = surviving[0] * pow_zero
    else:
        for k in range(size + 1):
            if surviving[k]:
                weight += surviving[k] * pow_one * pow_zero
            pow_one *= num
            pow_zero //= comp
    measure = 1 - Fraction(weight, den**size)
    bound = Fraction(1, 1 << d)
    return MeasureEstimate(
        method="exact-dp", bound=bound, satisfied=measure <= bound, value=measure
    )


# ---------------------------------------------------------------------------
# Monte Carlo


def wilson_interval(fires: int, trials: int, z: float = _Z99) -> tuple[float, float]:
    """Two-sided Wilson score interval for a binomial rate."""
    phat = fires / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (phat + z2 / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials))
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class OracleMC:
    """Estimate the deviation-test firing rate against an exact parameter."""

    p: Fraction
    d: int
    b_max: int

    family = "oracle"

    def required_len(self) -> int:
        return checkpoint_size(self.b_max)

    def bound(self, stream_p: Fraction) -> Fraction:
        return Fraction(1, 1 << self.d)


@dataclass(frozen=True)
class CauchyMC:
    d: int
    b_max: int

    family = "cauchy"

    def required_len(self) -> int:
        return checkpoint_size(self.b_max)

    def bound(self, stream_p: Fraction) -> Fraction:
        return Fraction(1, 1 << self.d)


@dataclass(frozen=True)
class SllnMC:
    q1: Fraction
    q2: Fraction
    n_start: int
    n_max: int

    family = "slln"

    def required_len(self) -> int:
        return self.n_max

    def bound(self, stream_p: Fraction) -> Fraction:
        return slln_bound(stream_p, self.q1, self.q2, self.n_start)


@dataclass(frozen=True)
class DiagonalMC:
    n: int
    k_max: int
    b_max: int

    family = "diagonal"

    def required_len(self) -> int:
        return checkpoint_size(self.b_max)

    def bound(self, stream_p: Fraction) -> Fraction:
        return Fraction(1, 1 << (self.n - 1))


def _counts_matrix(bits: np.ndarray, b_max: int) -> np.ndarray:
    """Per-trial one-counts at checkpoint levels 1..b_max (int64)."""
    trials = bits.shape[0]
    counts = np.empty((trials, b_max), dtype=np.int64)
    prev = 0
    acc = np.zeros(trials, dtype=np.int64)
    for b in range(1, b_max + 1):
        size = checkpoint_size(b)
        acc += bits[:, prev:size].sum(axis=1, dtype=np.int64)
        counts[:, b - 1] = acc
        prev = size
    return counts


def _oracle_fire_mask(counts: np.ndarray, spec: OracleMC) -> np.ndarray:
    num, den = spec.p.numerator, spec.p.denominator
    fired = np.zeros(counts.shape[0], dtype=bool)
    for b in range(spec.d, spec.b_max + 1):
        size = checkpoint_size(b)
        if den * size << b >= _I64_GUARD:
            raise TooLarge("oracle batch would overflow int64; reduce b_max or denominator")
        lhs = np.abs(counts[:, b - 1] * den - num * size) << b
        fired |= lhs >= den * size
    return fired


def _cauchy_fire_mask(counts: np.ndarray, spec: CauchyMC) -> np.ndarray:
    fired = np.zeros(counts.shape[0], dtype=bool)
    for a in range(spec.d, spec.b_max + 1):
        for b in range(a + 1, spec.b_max + 1):
            # |c_a N_b - c_b N_a| >= 2^(3a+2b-2) + 2^(2a+3b-2), the
            # pair condition cleared of denominators and common powers of 2
            if 3 * a + 3 * b - 2 >= 62:
                raise TooLarge("cauchy batch would overflow int64; reduce b_max")
            na, nb = checkpoint_size(a), checkpoint_size(b)
            lhs = np.abs(counts[:, a - 1] * nb - counts[:, b - 1] * na)
            rhs = (1 << (3 * a + 2 * b - 2)) + (1 << (2 * a + 3 * b - 2))
            fired |= lhs >= rhs
    return fired


def _slln_fire_mask(bits: np.ndarray, spec: SllnMC) -> np.ndarray:
    q1, q2 = spec.q1, spec.q2
    biggest = max(q1.numerator, q1.denominator, q2.numerator, q2.denominator)
    if biggest * (spec.n_max + 1) >= _I64_GUARD:
        raise TooLarge("slln batch would overflow int64; reduce n_max or denominators")
    csum = np.cumsum(bits[:, : spec.n_max], axis=1, dtype=np.int64)[:, spec.n_start - 1 :]
    ns = np.arange(spec.n_start, spec.n_max + 1, dtype=np.int64)
    low = (q1.denominator * csum <= q1.numerator * ns).any(axis=1)
    high = (q2.denominator * csum >= q2.numerator * ns).any(axis=1)
    return low | high


def _diagonal_fires(counts_row: np.ndarray, spec: DiagonalMC, family: OracleTestFamily) -> bool:
    summary = CheckpointSummary(1, spec.b_max, tuple(int(c) for c in counts_row))
    verdict = _diagonal_from_summary(
        summary, family, d=spec.n, n=spec.n, k_max=spec.k_max, resolution=spec.b_max
    )
    return verdict.is_in


def _run_batch(spec, stream_p: RealParam, seed: int, start: int, stop: int, family) -> int:
    seeds = np.fromiter(
        (substream_seed(seed, t) for t in range(start, stop)), dtype=np.uint64, count=stop - start
    )
    n = spec.required_len()
    bits = bitstream.bernoulli_matrix(stream_p, seeds, n)
    if isinstance(spec, SllnMC):
        return int(_slln_fire_mask(bits, spec).sum())
    counts = _counts_matrix(bits, spec.b_max)
    if isinstance(spec, OracleMC):
        return int(_oracle_fire_mask(counts, spec).sum())
    if isinstance(spec, CauchyMC):
        return int(_cauchy_fire_mask(counts, spec).sum())
    if isinstance(spec, DiagonalMC):
        return sum(_diagonal_fires(row, spec, family) for row in counts)
    raise TypeError(f"unknown Monte Carlo spec {spec!r}")


def harness_threads() -> int:
    try:
        return max(1, int(os.environ.get("HIPPOC_THREADS", "1")))
    except ValueError:
        return 1


def mc_estimate(
    spec,
    p,
    trials: int,
    prefix_len: int,
    seed: int,
    family: OracleTestFamily = DEFAULT_FAMILY,
    batch: int = 4096,
) -> MeasureEstimate:
    """Monte Carlo firing rate of a test over seeded Bernoulli(p) streams.

    Trial t runs on its own substream seed derived from (seed, t), so the
    estimate does not depend on batching or thread schedule. The reported
    flag says whether rate <= bound + halfwidth of the 99% Wilson interval.
    """
    if trials < 1:
        raise ZeroTrials("need at least one trial")
    p = p if isinstance(p, RealParam) else RealParam.from_exact(Fraction(p))
    if not p.is_exact:
        raise InvalidInterval("Monte Carlo streams need an exact bias")
    if prefix_len < spec.required_len():
        raise PrefixTooShort(spec.required_len(), prefix_len)

    ranges = [(s, min(trials, s + batch)) for s in range(0, trials, batch)]
    workers = harness_threads()
    if workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fires = sum(
                pool.map(lambda r: _run_batch(spec, p, seed, r[0], r[1], family), ranges)
            )
    else:
        fires = sum(_run_batch(spec, p, seed, lo, hi, family) for lo, hi in ranges)

    rate = Fraction(fires, trials)
    lo, hi = wilson_interval(fires, trials)
    halfwidth = (hi - lo) / 2
    bound = spec.bound(p.exact)
    # rate and bound are exact; the halfwidth allowance is converted exactly
    satisfied = rate <= bound + Fraction(*halfwidth.as_integer_ratio())
    return MeasureEstimate(
        method="monte-carlo",
        bound=bound,
        satisfied=satisfied,
        value=rate,
        trials=trials,
        fires=fires,
        seed=seed,
        ci_low=lo,
        ci_high=hi,
        ci_method="wilson-99",
    )
