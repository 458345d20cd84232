"""The three randomness test families, evaluated exactly on finite prefixes.

Checkpoint schedule: sample averages are inspected at sizes
checkpoint_size(b) = 2^(3b-1), so that a fourth of the Chebyshev budget at
level b bounds the chance of a deviation of 2^-b by 2^-(b+1), and the
levels sum geometrically.

All three families quantify over unboundedly many levels in their ideal
form; a finite prefix can only refute membership up to the truncation
bounds actually inspected. Verdicts therefore say PASS-UP-TO-TRUNCATION
rather than pass, and always record the resolution used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .bitstream import BitPrefix
from .errors import InvalidInterval, PrefixTooShort
from .exactnum import Comparison, RealParam, compare_deviation


def checkpoint_size(b: int) -> int:
    """Number of bits inspected at level b: 2^(3b-1)."""
    if b < 1:
        raise ValueError("levels start at 1")
    return 1 << (3 * b - 1)


@dataclass(frozen=True)
class CheckpointSummary:
    """Exact one-counts at the checkpoints for levels d..b_max."""

    d: int
    b_max: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= self.d <= self.b_max:
            raise ValueError("need 1 <= d <= b_max")
        if len(self.counts) != self.b_max - self.d + 1:
            raise ValueError("one count per level")
        prev = 0
        for b, c in zip(self.levels(), self.counts):
            if not prev <= c <= checkpoint_size(b):
                raise ValueError(f"count {c} invalid at level {b}")
            prev = c

    def levels(self) -> range:
        return range(self.d, self.b_max + 1)

    def count(self, b: int) -> int:
        return self.counts[b - self.d]

    def average(self, b: int) -> Fraction:
        """Sample average at level b, an exact dyadic rational."""
        return Fraction(self.count(b), checkpoint_size(b))

    def covers(self, lo: int, hi: int) -> bool:
        return self.d <= lo and hi <= self.b_max


def checkpoints(y: BitPrefix, d: int, b_max: int) -> CheckpointSummary:
    """One pass of exact one-counts at every checkpoint in [d, b_max]."""
    if not 1 <= d <= b_max:
        raise ValueError("need 1 <= d <= b_max")
    required = checkpoint_size(b_max)
    if len(y) < required:
        raise PrefixTooShort(required, len(y))
    return CheckpointSummary(
        d, b_max, tuple(y.ones_in_prefix(checkpoint_size(b)) for b in range(d, b_max + 1))
    )


class Outcome(Enum):
    FAIL = "FAIL"
    PASS = "PASS-UP-TO-TRUNCATION"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class Witness:
    """Evidence for a FAIL: which level or pair fired, with the exact
    deviation and the threshold it met. Re-checkable from raw counts."""

    deviation: Fraction
    threshold: Fraction
    level: int | None = None
    pair: tuple[int, int] | None = None
    index: int | None = None
    side: str | None = None
    values: tuple[Fraction, ...] = ()


@dataclass(frozen=True, eq=False)
class TestVerdict:
    family: str
    outcome: Outcome
    witness: Witness | None
    resolution: dict
    averages: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.outcome is Outcome.FAIL and self.witness is None:
            raise ValueError("FAIL requires a witness")


def _deviation_threshold(b: int) -> Fraction:
    return Fraction(1, 1 << b)


def _oracle_from_summary(summary: CheckpointSummary, p: RealParam, d: int, b_max: int) -> TestVerdict:
    assert summary.covers(d, b_max)
    resolution = {"d": d, "b_max": b_max, "bits_used": checkpoint_size(b_max)}
    averages = {b: summary.average(b) for b in range(d, b_max + 1)}
    undecided = False
    lo, hi = p.bounds()
    for b in range(d, b_max + 1):
        avg = averages[b]
        eps = _deviation_threshold(b)
        cmp = compare_deviation(avg, p, eps)
        if cmp is Comparison.GEQ:
            if avg < lo:
                dev = lo - avg
            elif avg > hi:
                dev = avg - hi
            else:
                dev = Fraction(0)
            return TestVerdict(
                "oracle",
                Outcome.FAIL,
                Witness(deviation=dev, threshold=eps, level=b, values=(avg,)),
                resolution,
                averages,
            )
        if cmp is Comparison.UNDECIDED:
            undecided = True
    outcome = Outcome.UNDECIDED if undecided else Outcome.PASS
    return TestVerdict("oracle", outcome, None, resolution, averages)


def oracle_test(y: BitPrefix, p, d: int, b_max: int) -> TestVerdict:
    """Deviation test with access to the bias parameter p.

    FAIL with the smallest level b in [d, b_max] whose sample average
    provably deviates from p by at least 2^-b. With an interval-valued p
    the verdict may be UNDECIDED: some level could neither be cleared nor
    convicted.
    """
    if not isinstance(p, RealParam):
        p = RealParam.from_exact(Fraction(p))
    return _oracle_from_summary(checkpoints(y, d, b_max), p, d, b_max)


def _cauchy_from_summary(summary: CheckpointSummary, d: int, b_max: int) -> TestVerdict:
    assert summary.covers(d, b_max)
    resolution = {"d": d, "b_max": b_max, "bits_used": checkpoint_size(b_max)}
    averages = {b: summary.average(b) for b in range(d, b_max + 1)}
    for a in range(d, b_max + 1):
        for b in range(a + 1, b_max + 1):
            gap = abs(averages[a] - averages[b])
            threshold = _deviation_threshold(a) + _deviation_threshold(b)
            if gap >= threshold:
                return TestVerdict(
                    "cauchy",
                    Outcome.FAIL,
                    Witness(
                        deviation=gap,
                        threshold=threshold,
                        pair=(a, b),
                        values=(averages[a], averages[b]),
                    ),
                    resolution,
                    averages,
                )
    return TestVerdict("cauchy", Outcome.PASS, None, resolution, averages)


def cauchy_test(y: BitPrefix, d: int, b_max: int) -> TestVerdict:
    """Checkpoint-coherence test: no reference to any parameter.

    FAIL with the lexicographically smallest pair (a, b), d <= a < b <= b_max,
    whose averages differ by at least 2^-a + 2^-b. If a single bias is within
    2^-b of every checkpoint average, no pair can fire, so this is a subset
    of every parameterised deviation test at the same level.
    """
    return _cauchy_from_summary(checkpoints(y, d, b_max), d, b_max)


# int64 headroom guard for the vectorised running-average scan
_I64_GUARD = 1 << 62


def slln_test(y: BitPrefix, q1, q2, n_start: int, n_max: int) -> TestVerdict:
    """Fire as soon as some running average in [n_start, n_max] leaves
    (q1, q2). Comparisons are exact: count * den <= num * n in integers."""
    q1, q2 = Fraction(q1), Fraction(q2)
    if not 0 <= q1 < q2 <= 1:
        raise InvalidInterval(f"need 0 <= q1 < q2 <= 1, got {q1}, {q2}")
    if not 1 <= n_start <= n_max:
        raise ValueError("need 1 <= n_start <= n_max")
    if len(y) < n_max:
        raise PrefixTooShort(n_max, len(y))
    resolution = {"n_start": n_start, "n_max": n_max}

    hit = None
    if max(q1.denominator, q2.denominator, q1.numerator, q2.numerator) * (n_max + 1) < _I64_GUARD:
        # blocked scan: keeps temporaries small on long prefixes and exits
        # at the first firing index
        block = 1 << 20
        carry = 0
        for lo in range(0, n_max, block):
            hi = min(n_max, lo + block)
            counts = np.cumsum(y.unpack_range(lo, hi), dtype=np.int64)
            counts += carry
            carry = int(counts[-1])
            if hi < n_start:
                continue
            off = max(0, n_start - 1 - lo)
            seg = counts[off:]
            ns = np.arange(lo + off + 1, hi + 1, dtype=np.int64)
            low = q1.denominator * seg <= q1.numerator * ns
            high = q2.denominator * seg >= q2.numerator * ns
            fired = np.nonzero(low | high)[0]
            if fired.size:
                i = int(fired[0])
                hit = (int(ns[i]), int(seg[i]), bool(low[i]))
                break
    else:
        count = y.ones_in_prefix(n_start - 1)
        for i in range(n_start - 1, n_max):
            count += y.bit(i)
            n = i + 1
            if q1.denominator * count <= q1.numerator * n:
                hit = (n, count, True)
                break
            if q2.denominator * count >= q2.numerator * n:
                hit = (n, count, False)
                break

    if hit is None:
        return TestVerdict("slln", Outcome.PASS, None, resolution)
    n, count, is_low = hit
    avg = Fraction(count, n)
    return TestVerdict(
        "slln",
        Outcome.FAIL,
        Witness(
            deviation=avg,
            threshold=q1 if is_low else q2,
            index=n,
            side="low" if is_low else "high",
            values=(avg,),
        ),
        resolution,
    )


def slln_bound(p, q1, q2, n_start: int) -> Fraction:
    """Exact tail bound on the firing probability of slln_test from
    n_start onward: 3/(2 (p-q1)^4 (N-1)) + 3/(2 (q2-p)^4 (N-1)).

    Derived from the fourth-moment inequality for centred Bernoulli sums;
    not clamped to 1, callers may clamp for reporting.
    """
    p, q1, q2 = Fraction(p), Fraction(q1), Fraction(q2)
    if not q1 < p < q2:
        raise InvalidInterval(f"need q1 < p < q2, got {q1} < {p} < {q2}")
    if n_start < 2:
        raise ZeroDivisionError("bound needs n_start >= 2")
    scale = Fraction(3, 2 * (n_start - 1))
    return scale / (p - q1) ** 4 + scale / (q2 - p) ** 4
