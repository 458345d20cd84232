"""Certified digit extraction: recover leading binary digits of the bias
from checkpoint averages of a stream that behaves coherently.

The rule for one digit
----------------------
Fix a target position n. At candidate level b (with b >= n+2 so the window
below is nonempty) consult the checkpoint average A and its exact binary
expansion .y0 y1 y2 ... The digit y_n is certified if the expansion bits at
positions n+1 .. b-1 (the run region) are neither all ones nor all zeros.

Why that suffices: a zero in the run region caps A + 2^-b below the next
multiple of 2^-(n+1), and a one in the region keeps A - 2^-b at or above
the current one. So every real r with |A - r| < 2^-b shares the first n+1
expansion bits with A, and in particular its digit at position n is y_n.
Whether the certified digit equals the true bias digit therefore reduces to
whether the consulted average was within 2^-b of the true bias, which is
exactly what the deviation tests monitor.

Two functionals are provided: psi consults the level-b checkpoint itself,
theta consults level b+1 (one schedule step deeper), which buys the slack
needed when only checkpoint coherence, not the true bias, is available.

A bias that is itself a dyadic rational has an eventually constant
expansion, so its run regions never break and extraction stays undecided
forever. That is reported, not raised.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bitstream import BitPrefix
from .errors import PrefixTooShort
from .exactnum import DyadicExpansion, expansion_of
from .randtests import CheckpointSummary, checkpoint_size, checkpoints

FUNCTIONALS = ("psi", "theta")


def consulted_level(b: int, functional: str) -> int:
    """Checkpoint level whose average certifies candidate level b."""
    if functional not in FUNCTIONALS:
        raise ValueError(f"unknown functional {functional!r}")
    return b if functional == "psi" else b + 1


@dataclass(frozen=True)
class BitCertificate:
    """One certified digit with the evidence that certifies it."""

    position: int
    bit: int
    level: int  # certifying level b
    checkpoint: int  # size of the consulted checkpoint
    expansion: DyadicExpansion  # exact expansion of the consulted average
    run_region: str  # expansion bits at positions n+1 .. b-1

    def __post_init__(self):
        region_len = self.level - (self.position + 1)
        if len(self.run_region) != region_len or region_len < 1:
            raise ValueError("run region must cover positions n+1..b-1")
        if set(self.run_region) in ({"0"}, {"1"}):
            raise ValueError("run region must be mixed")
        if self.bit != self.expansion.bit_at(self.position):
            raise ValueError("certified bit must match the expansion")


@dataclass(frozen=True)
class ExtractionReport:
    functional: str
    d: int
    b_budget: int
    certificates: tuple[BitCertificate, ...]
    first_undecided: int | None
    highest_checkpoint: int
    conflicts: tuple[int, ...] = ()

    def bits(self) -> tuple[int, ...]:
        return tuple(c.bit for c in self.certificates)

    def prefix(self) -> DyadicExpansion:
        """The certified digits as one expansion prefix."""
        return DyadicExpansion(self.bits())


def _scan_position(
    summary: CheckpointSummary, d: int, n: int, b_budget: int, functional: str
) -> tuple[BitCertificate | None, bool, int]:
    """Scan candidate levels for position n, smallest first.

    Returns (certificate-or-None, conflict flag, highest checkpoint
    consulted). The conflict flag is set when a later certifying level
    disagrees on the digit, which cannot happen on coherent input but is
    worth surfacing on adversarial data.
    """
    first: BitCertificate | None = None
    conflict = False
    highest = 0
    for b in range(max(n + 2, d), b_budget + 1):
        level = consulted_level(b, functional)
        size = checkpoint_size(level)
        highest = max(highest, size)
        avg = summary.average(level)
        if avg == 0 or avg == 1:
            # degenerate averages have constant expansions, nothing breaks
            continue
        exp = expansion_of(avg)
        region = [exp.bit_at(i) for i in range(n + 1, b)]
        if all(x == 1 for x in region) or all(x == 0 for x in region):
            continue
        cert = BitCertificate(
            position=n,
            bit=exp.bit_at(n),
            level=b,
            checkpoint=size,
            expansion=exp,
            run_region="".join(str(x) for x in region),
        )
        if first is None:
            first = cert
        elif cert.bit != first.bit:
            conflict = True
    return first, conflict, highest


def _summary_for(y: BitPrefix, d: int, b_budget: int, functional: str) -> CheckpointSummary | None:
    """Checkpoint counts covering every level any scan in budget may touch."""
    if max(2, d) > b_budget:
        return None  # no candidate levels at all
    top = consulted_level(b_budget, functional)
    required = checkpoint_size(top)
    if len(y) < required:
        raise PrefixTooShort(required, len(y))
    return checkpoints(y, 1, top)


def _extract_bit_from_summary(
    summary: CheckpointSummary | None, d: int, n: int, b_budget: int, functional: str
) -> BitCertificate | None:
    if summary is None or max(n + 2, d) > b_budget:
        return None
    cert, _, _ = _scan_position(summary, d, n, b_budget, functional)
    return cert


def extract_bit(
    y: BitPrefix, d: int, n: int, b_budget: int, functional: str = "theta"
) -> BitCertificate | None:
    """Certify the digit at position n, or return None if no level within
    the budget certifies it."""
    if functional not in FUNCTIONALS:
        raise ValueError(f"unknown functional {functional!r}")
    if n < 0 or d < 1:
        raise ValueError("need n >= 0 and d >= 1")
    return _extract_bit_from_summary(_summary_for(y, d, b_budget, functional), d, n, b_budget, functional)


def _extract_prefix_from_summary(
    summary: CheckpointSummary | None, d: int, n_target: int, b_budget: int, functional: str
) -> ExtractionReport:
    certs: list[BitCertificate] = []
    conflicts: list[int] = []
    first_undecided = None
    highest = 0
    for n in range(n_target):
        if summary is None or max(n + 2, d) > b_budget:
            first_undecided = n
            break
        cert, conflict, touched = _scan_position(summary, d, n, b_budget, functional)
        highest = max(highest, touched)
        if cert is None:
            first_undecided = n
            break
        certs.append(cert)
        if conflict:
            conflicts.append(n)
    return ExtractionReport(
        functional=functional,
        d=d,
        b_budget=b_budget,
        certificates=tuple(certs),
        first_undecided=first_undecided,
        highest_checkpoint=highest,
        conflicts=tuple(conflicts),
    )


def extract_prefix(
    y: BitPrefix, d: int, n_target: int, b_budget: int, functional: str = "theta"
) -> ExtractionReport:
    """Certify digits at positions 0, 1, ... until the first undecided
    position or n_target digits, whichever comes first. The certified set
    is always a contiguous prefix."""
    if functional not in FUNCTIONALS:
        raise ValueError(f"unknown functional {functional!r}")
    if n_target < 0 or d < 1:
        raise ValueError("need n_target >= 0 and d >= 1")
    summary = _summary_for(y, d, b_budget, functional)
    return _extract_prefix_from_summary(summary, d, n_target, b_budget, functional)
