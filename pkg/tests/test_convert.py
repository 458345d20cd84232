import random
from fractions import Fraction

import pytest

from hippoc import (
    DEFAULT_FAMILY,
    DyadicExpansion,
    Outcome,
    TruncatedUFamily,
    cauchy_test,
    checkpoint_size,
    diagonal_member,
    diagonal_test,
    gen_adversarial,
    gen_bernoulli,
    oracle_test,
)
from hippoc.errors import PrefixTooShort

from _helpers import prefix_from_counts


def corrupted_third_stream():
    """Checkpoint counts that track 1/3 through level 4, then jump.

    avg5 = 8704/16384 = 17/32 escapes the certified interval [0, 1/2] by
    exactly 2^-5, so the default family fires at level 5 with only one
    certified digit, while the true bias 1/3 is genuinely violated there.
    """
    return prefix_from_counts({1: 1, 2: 11, 3: 85, 4: 683, 5: 8704})


class TestTruncatedUFamily:
    def test_fires_only_on_certain_deviation(self):
        y = corrupted_third_stream()
        fam = TruncatedUFamily()
        # interval [0, 1/2] from the single digit 0: avg5 = 17/32 deviates
        # by >= 2^-5 from every parameter in it
        assert fam.member(DyadicExpansion((0,)), 1, y, 5)
        # the empty prefix means the whole of [0, 1], never decidable
        assert not fam.member(DyadicExpansion(()), 1, y, 5)
        # a level window above the jump sees coherent averages only
        assert not fam.member(DyadicExpansion((0,)), 1, gen_bernoulli(Fraction(1, 3), checkpoint_size(5), 3), 5)

    def test_prefix_monotone(self):
        y = corrupted_third_stream()
        fam = TruncatedUFamily()
        assert fam.member(DyadicExpansion((0,)), 1, y, 5)
        # every extension of a firing prefix still fires
        assert fam.member(DyadicExpansion((0, 0)), 1, y, 5)
        assert fam.member(DyadicExpansion((0, 1)), 1, y, 5)


class TestDiagonalMember:
    def test_all_ones_not_yet(self):
        y = gen_adversarial("all-ones", checkpoint_size(5))
        verdict = diagonal_member(y, DEFAULT_FAMILY, d=1, n=1, k_max=8, resolution=5)
        assert verdict.outcome == "NOT-YET"
        assert verdict.extraction.bits() == ()

    def test_alternating_not_yet(self):
        y = gen_adversarial("alternating", checkpoint_size(5))
        verdict = diagonal_member(y, DEFAULT_FAMILY, d=1, n=1, k_max=8, resolution=5)
        assert verdict.outcome == "NOT-YET"

    def test_corrupted_stream_is_in(self):
        y = corrupted_third_stream()
        verdict = diagonal_member(y, DEFAULT_FAMILY, d=1, n=1, k_max=8, resolution=5)
        assert verdict.outcome == "IN"
        assert verdict.witness_k == 1
        assert verdict.prefix_used == DyadicExpansion((0,))
        # verified by re-running the family against the exact bias: the
        # corruption is a genuine deviation from 1/3 as well
        assert oracle_test(y, Fraction(1, 3), 1, 5).outcome is Outcome.FAIL

    def test_kmax_zero_is_vacuous(self):
        y = corrupted_third_stream()
        verdict = diagonal_member(y, DEFAULT_FAMILY, d=1, n=1, k_max=0, resolution=5)
        assert verdict.outcome == "NOT-YET"

    def test_monotone_in_kmax_and_resolution(self):
        y = corrupted_third_stream()
        base = diagonal_member(y, DEFAULT_FAMILY, d=1, n=1, k_max=1, resolution=5)
        assert base.outcome == "IN"
        wider = diagonal_member(y, DEFAULT_FAMILY, d=1, n=1, k_max=6, resolution=5)
        assert wider.outcome == "IN"
        assert wider.witness_k == base.witness_k

    def test_prefix_too_short(self):
        with pytest.raises(PrefixTooShort):
            diagonal_member(
                gen_adversarial("all-zeros", 100), DEFAULT_FAMILY, d=1, n=1, k_max=2, resolution=4
            )


class TestDiagonalTest:
    def test_diagonal_uses_matching_levels(self):
        y = corrupted_third_stream()
        verdict = diagonal_test(y, DEFAULT_FAMILY, n=1, k_max=8, resolution=5)
        assert verdict.outcome is Outcome.FAIL
        assert verdict.resolution["declared_bound"] == Fraction(1, 1)  # 2^-(1-1)

    def test_declared_bound_scale(self):
        y = gen_bernoulli(Fraction(3, 10), checkpoint_size(5), seed=5)
        verdict = diagonal_test(y, DEFAULT_FAMILY, n=3, k_max=8, resolution=5)
        assert verdict.resolution["declared_bound"] == Fraction(1, 4)

    def test_all_zeros_not_in(self):
        y = gen_adversarial("all-zeros", checkpoint_size(5))
        verdict = diagonal_test(y, DEFAULT_FAMILY, n=1, k_max=8, resolution=5)
        assert verdict.outcome is Outcome.PASS


class TestInclusion:
    def test_in_and_coherent_implies_oracle_fail(self):
        # fuzz crafted checkpoint counts; whenever the diagonal is IN and
        # the coherence test passes, the deviation test with the true bias
        # must fail at the same level
        rng = random.Random(11)
        grid = [Fraction(k, 16) for k in range(1, 16)]
        in_count = 0
        pass_count = 0
        for _ in range(400):
            counts = {}
            prev_count, prev_size = 0, 0
            for b in range(1, 6):
                size = checkpoint_size(b)
                frac = rng.random()
                if rng.random() < 0.6:
                    # keep increments near a common bias so coherent
                    # streams occur often
                    frac = 0.3 + 0.1 * (rng.random() - 0.5)
                inc = int(frac * (size - prev_size))
                counts[b] = prev_count + max(0, min(size - prev_size, inc))
                prev_count, prev_size = counts[b], size
            y = prefix_from_counts(counts)
            for p in (grid[2], grid[7]):
                for d in (1, 2):
                    for n in (1, 2, 3):
                        verdict = diagonal_member(y, DEFAULT_FAMILY, d=d, n=n, k_max=6, resolution=5)
                        coherent = cauchy_test(y, d, 5).outcome is Outcome.PASS
                        in_count += verdict.outcome == "IN"
                        pass_count += coherent
                        if verdict.outcome == "IN" and coherent:
                            assert oracle_test(y, p, n, 5).outcome is Outcome.FAIL
        assert in_count > 0  # the fuzz does reach IN verdicts
        assert pass_count > 0  # and coherent streams
