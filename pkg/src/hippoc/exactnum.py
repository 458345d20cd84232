"""Exact arithmetic layer: rationals, finite binary expansions, and
three-valued comparisons against a partially known parameter.

Every number that can influence a verdict is a `fractions.Fraction` or a
plain integer. Floating point is deliberately absent: the test conditions
are exact inequalities between dyadic rationals, and a single rounded
comparison could flip a membership decision.

A bias parameter may be known exactly (a rational point) or only through
the first m bits of its binary expansion. The latter denotes the closed
interval [v, v + 2**-m], and comparisons against it return UNDECIDED when
the interval straddles the decision boundary, instead of guessing.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .errors import NonDyadicDenominator, OutOfRange, ParseError

# All exact arithmetic rides on the stdlib Fraction: normalised, positive
# denominator, arbitrary precision.
Rational = Fraction


def parse_rational(text: str) -> Fraction:
    """Parse "a/b" (or a bare integer) into a Fraction."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"not a rational: {text!r}") from exc


def format_rational(x: Fraction) -> str:
    """Canonical "a/b" text form, denominator always explicit."""
    return f"{x.numerator}/{x.denominator}"


class Comparison(Enum):
    """Outcome of a deviation comparison against a possibly-interval bias."""

    GEQ = "GEQ"
    LT = "LT"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class DyadicExpansion:
    """A finite binary expansion .b0 b1 b2 ... with value sum(b_i 2^-i-1).

    The length is significant: "01" and "0100" have the same value but name
    different prefixes (and hence different uncertainty intervals). Positions
    past the end read as zero.
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("expansion bits must be 0 or 1")

    @classmethod
    def from_string(cls, text: str) -> "DyadicExpansion":
        """Parse "0101" or "0.0101"; "0." denotes the empty expansion."""
        if text.startswith("0."):
            text = text[2:]
        if not all(c in "01" for c in text):
            raise ParseError(f"not a binary expansion: {text!r}")
        return cls(tuple(int(c) for c in text))

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "0." + "".join(str(b) for b in self.bits)

    def bit_at(self, i: int) -> int:
        """Bit at position i, implicit zeros past the stored length."""
        if i < 0:
            raise IndexError(i)
        return self.bits[i] if i < len(self.bits) else 0

    def value(self) -> Fraction:
        v = 0
        for b in self.bits:
            v = 2 * v + b
        return Fraction(v, 1 << len(self.bits)) if self.bits else Fraction(0)

    def extended(self, bit: int) -> "DyadicExpansion":
        return DyadicExpansion(self.bits + (bit,))

    def truncated(self, k: int) -> "DyadicExpansion":
        return DyadicExpansion(self.bits[:k])


def expansion_of(x: Fraction) -> DyadicExpansion:
    """Exact binary expansion of a dyadic rational in [0, 1).

    For x = k / 2^m in lowest terms the result has exactly m bits; positions
    at or beyond m are implicitly zero.
    """
    if not 0 <= x < 1:
        raise OutOfRange(f"{x} is not in [0, 1)")
    den = x.denominator
    if den & (den - 1):
        raise NonDyadicDenominator(f"denominator {den} is not a power of two")
    m = den.bit_length() - 1
    k = x.numerator
    return DyadicExpansion(tuple((k >> (m - 1 - i)) & 1 for i in range(m)))


@dataclass(frozen=True)
class RealParam:
    """A bias value in [0, 1]: either an exact rational point, or an
    interval [v, v + 2^-m] described by the first m expansion bits.

    A prefix-valued parameter is genuine uncertainty. No operation in this
    package assumes a point value for it; comparisons that the interval
    cannot settle come back UNDECIDED.
    """

    exact: Fraction | None = None
    prefix: DyadicExpansion | None = None

    def __post_init__(self):
        if (self.exact is None) == (self.prefix is None):
            raise ValueError("exactly one of exact/prefix must be given")
        if self.exact is not None and not 0 <= self.exact <= 1:
            raise OutOfRange(f"bias {self.exact} outside [0, 1]")

    @classmethod
    def from_exact(cls, p) -> "RealParam":
        return cls(exact=Fraction(p))

    @classmethod
    def from_prefix(cls, prefix: DyadicExpansion) -> "RealParam":
        return cls(prefix=prefix)

    @classmethod
    def parse(cls, text: str) -> "RealParam":
        """Parse "a/b" as an exact value, "0.0101" as a 4-bit prefix."""
        text = text.strip()
        if text.startswith("0.") or text.startswith("1."):
            if text.startswith("1."):
                raise ParseError(f"binary prefix must start with '0.': {text!r}")
            return cls.from_prefix(DyadicExpansion.from_string(text))
        return cls.from_exact(parse_rational(text))

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    def bounds(self) -> tuple[Fraction, Fraction]:
        """The closed interval of values consistent with this parameter."""
        if self.exact is not None:
            return self.exact, self.exact
        v = self.prefix.value()
        return v, v + Fraction(1, 1 << len(self.prefix))

    def describe(self) -> str:
        if self.exact is not None:
            return format_rational(self.exact)
        return str(self.prefix)


def compare_deviation(x: Fraction, p: RealParam, eps: Fraction) -> Comparison:
    """Decide |x - p| >= eps when p may only be partially known.

    GEQ means the inequality holds for every value consistent with p, LT
    means |x - p| < eps for every such value, UNDECIDED means the interval
    contains values on both sides. With an exact p the answer is never
    UNDECIDED.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0 <= x <= 1:
        raise OutOfRange(f"{x} is not in [0, 1]")
    lo, hi = p.bounds()
    if lo <= x <= hi:
        min_dist = Fraction(0)
    else:
        min_dist = lo - x if x < lo else x - hi
    max_dist = max(abs(x - lo), abs(x - hi))
    if min_dist >= eps:
        return Comparison.GEQ
    if max_dist < eps:
        return Comparison.LT
    return Comparison.UNDECIDED
