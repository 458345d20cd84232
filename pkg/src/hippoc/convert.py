"""Turn a parameterised (oracle) test family into an oracle-free one.

The construction plugs the extracted digit prefix into the oracle slot:
membership at level n holds if for some k within budget the extractor
certifies k digits and the family, consulted with that k-bit prefix as its
(partial) oracle, already reports membership.

Families must be prefix-monotone and three-valued safe: with a k-bit
oracle prefix the family knows the parameter only up to the closed
interval [v, v + 2^-k] and may count a stream as IN only when membership
holds for every parameter in that interval. This keeps the containment
honest: a diagonal IN on a checkpoint-coherent stream always implies a
genuine deviation against the true parameter.

The default family is the truncated deviation family: IN at level n iff
some checkpoint level in [n, resolution] deviates from the whole oracle
interval by at least its threshold.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction

from .bitstream import BitPrefix
from .errors import PrefixTooShort
from .exactnum import Comparison, DyadicExpansion, RealParam, compare_deviation
from .extract import ExtractionReport, _extract_prefix_from_summary
from .randtests import (
    CheckpointSummary,
    Outcome,
    TestVerdict,
    Witness,
    checkpoint_size,
    checkpoints,
)


class OracleTestFamily(ABC):
    """A level-indexed test family that consults the parameter only through
    a finite expansion prefix.

    Contract: for every bias p the level-n component has measure at most
    2^-n, and verdicts are monotone in both arguments: IN with prefix sigma
    stays IN for every extension of sigma and of the data.
    """

    name: str = "abstract"

    @abstractmethod
    def member(
        self, oracle_prefix: DyadicExpansion, n: int, y: BitPrefix, resolution: int
    ) -> bool:
        """True means IN, False means NOT-YET at this resolution."""


class TruncatedUFamily(OracleTestFamily):
    """Deviation family driven by an oracle-prefix interval.

    IN at level n iff some checkpoint level b in [n, resolution] satisfies
    |average(b) - p| >= 2^-b for every p in [val(prefix), val(prefix)+2^-k].
    Only interval-certain deviations count, so an uncertain interval can
    never produce a false membership.
    """

    name = "truncated-deviation"

    def member(
        self, oracle_prefix: DyadicExpansion, n: int, y: BitPrefix, resolution: int
    ) -> bool:
        if n > resolution:
            return False
        return self.member_from_summary(oracle_prefix, n, checkpoints(y, n, resolution), resolution)

    def member_from_summary(
        self,
        oracle_prefix: DyadicExpansion,
        n: int,
        summary: CheckpointSummary,
        resolution: int,
    ) -> bool:
        if n > resolution:
            return False
        assert summary.covers(n, resolution)
        param = RealParam.from_prefix(oracle_prefix)
        for b in range(n, resolution + 1):
            cmp = compare_deviation(summary.average(b), param, Fraction(1, 1 << b))
            if cmp is Comparison.GEQ:
                return True
        return False


DEFAULT_FAMILY = TruncatedUFamily()


@dataclass(frozen=True)
class DiagonalVerdict:
    outcome: str  # "IN" | "NOT-YET"
    d: int
    n: int
    k_max: int
    resolution: int
    witness_k: int | None = None
    prefix_used: DyadicExpansion | None = None
    extraction: ExtractionReport | None = None

    @property
    def is_in(self) -> bool:
        return self.outcome == "IN"


def _diagonal_from_summary(
    summary: CheckpointSummary,
    family: OracleTestFamily,
    d: int,
    n: int,
    k_max: int,
    resolution: int,
    y: BitPrefix | None = None,
) -> DiagonalVerdict:
    extraction = _extract_prefix_from_summary(
        summary if max(2, d) <= resolution - 1 else None,
        d,
        n_target=k_max,
        b_budget=resolution - 1,
        functional="theta",
    )
    bits = extraction.bits()
    fast = isinstance(family, TruncatedUFamily)
    for k in range(0, min(k_max, len(bits)) + 1):
        sigma = DyadicExpansion(bits[:k])
        if fast:
            hit = family.member_from_summary(sigma, n, summary, resolution)
        else:
            hit = family.member(sigma, n, y, resolution)
        if hit:
            return DiagonalVerdict(
                outcome="IN",
                d=d,
                n=n,
                k_max=k_max,
                resolution=resolution,
                witness_k=k,
                prefix_used=sigma,
                extraction=extraction,
            )
    return DiagonalVerdict(
        outcome="NOT-YET", d=d, n=n, k_max=k_max, resolution=resolution, extraction=extraction
    )


def diagonal_member(
    y: BitPrefix,
    family: OracleTestFamily,
    d: int,
    n: int,
    k_max: int,
    resolution: int,
) -> DiagonalVerdict:
    """Membership at level n using extracted digits in place of the oracle.

    Searches k = 0, 1, ..., k_max smallest first; IN reports the smallest k
    whose certified prefix makes the family fire.
    """
    if d < 1 or n < 1 or k_max < 0 or resolution < 1:
        raise ValueError("need d, n, resolution >= 1 and k_max >= 0")
    required = checkpoint_size(resolution)
    if len(y) < required:
        raise PrefixTooShort(required, len(y))
    summary = checkpoints(y, 1, resolution)
    return _diagonal_from_summary(summary, family, d, n, k_max, resolution, y=y)


def diagonal_test(
    y: BitPrefix,
    family: OracleTestFamily,
    n: int,
    k_max: int,
    resolution: int,
) -> TestVerdict:
    """The diagonal at level n: extraction level and test level coincide.

    Declared measure bound 2^-(n-1): one 2^-n budget for the family plus
    one for extraction working at level d = n.
    """
    verdict = diagonal_member(y, family, d=n, n=n, k_max=k_max, resolution=resolution)
    declared_bound = Fraction(1, 1 << (n - 1)) if n >= 1 else Fraction(2)
    resolution_info = {
        "n": n,
        "k_max": k_max,
        "resolution": resolution,
        "declared_bound": declared_bound,
        "family": family.name,
    }
    if verdict.is_in:
        witness = Witness(
            deviation=Fraction(0),
            threshold=Fraction(0),
            level=verdict.witness_k,
            side=str(verdict.prefix_used),
        )
        return TestVerdict("diagonal", Outcome.FAIL, witness, resolution_info)
    return TestVerdict("diagonal", Outcome.PASS, None, resolution_info)
