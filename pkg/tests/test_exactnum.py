import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hippoc import Comparison, DyadicExpansion, RealParam, compare_deviation, expansion_of
from hippoc.errors import NonDyadicDenominator, OutOfRange, ParseError
from hippoc.exactnum import format_rational, parse_rational

from _helpers import long_division_bits


class TestExpansionOf:
    @pytest.mark.parametrize(
        "x, bits",
        [
            (Fraction(3, 4), "11"),
            (Fraction(0), ""),
            (Fraction(85, 256), "01010101"),  # long division oracle below
        ],
    )
    def test_known_expansions(self, x, bits):
        assert str(expansion_of(x)) == "0." + bits

    def test_against_long_division_oracle(self):
        rng = random.Random(1)
        for _ in range(300):
            m = rng.randrange(0, 40)
            k = rng.randrange(0, 1 << m) if m else 0
            x = Fraction(k, 1 << m)
            exp = expansion_of(x)
            want = long_division_bits(x, m).rstrip("0")
            assert "".join(str(b) for b in exp.bits) == want

    def test_non_dyadic_denominator(self):
        with pytest.raises(NonDyadicDenominator):
            expansion_of(Fraction(1, 3))

    @pytest.mark.parametrize("x", [Fraction(1), Fraction(5, 4), Fraction(-1, 2)])
    def test_out_of_range(self, x):
        with pytest.raises(OutOfRange):
            expansion_of(x)

    @given(st.integers(min_value=0, max_value=60), st.data())
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, m, data):
        k = data.draw(st.integers(min_value=0, max_value=(1 << m) - 1)) if m else 0
        x = Fraction(k, 1 << m)
        assert expansion_of(x).value() == x


class TestDyadicExpansion:
    def test_length_is_significant(self):
        a = DyadicExpansion.from_string("01")
        b = DyadicExpansion.from_string("0100")
        assert a.value() == b.value()
        assert a != b
        assert len(a) == 2 and len(b) == 4

    def test_positions_past_end_are_zero(self):
        e = DyadicExpansion.from_string("101")
        assert [e.bit_at(i) for i in range(6)] == [1, 0, 1, 0, 0, 0]

    def test_parse_dotted(self):
        assert DyadicExpansion.from_string("0.011").bits == (0, 1, 1)
        with pytest.raises(ParseError):
            DyadicExpansion.from_string("0.01x")


# interval [1/4, 1/2] described by the two known bits "01"
P_01 = RealParam.parse("0.01")


class TestCompareDeviation:
    @pytest.mark.parametrize(
        "x, eps, want",
        [
            # min distance 3/4 - 1/2 = 1/4 >= 1/8, certain either way
            (Fraction(3, 4), Fraction(1, 8), Comparison.GEQ),
            # max distance max(1/16, 3/16) = 3/16 < 1/4
            (Fraction(5, 16), Fraction(1, 4), Comparison.LT),
            # distance 0 at p=1/4 but 1/4 at p=1/2
            (Fraction(1, 4), Fraction(1, 8), Comparison.UNDECIDED),
        ],
    )
    def test_interval_examples(self, x, eps, want):
        assert compare_deviation(x, P_01, eps) is want

    def test_exact_parameter_agrees_with_direct_comparison(self):
        rng = random.Random(7)
        for _ in range(10_000):
            x = Fraction(rng.randrange(0, 257), 256)
            p = Fraction(rng.randrange(0, 65), 64)
            if x > 1 or p > 1:
                continue
            eps = Fraction(1, 1 << rng.randrange(0, 8))
            got = compare_deviation(x, RealParam.from_exact(p), eps)
            want = Comparison.GEQ if abs(x - p) >= eps else Comparison.LT
            assert got is want

    def test_exact_never_undecided_on_boundary(self):
        p = RealParam.from_exact(Fraction(1, 2))
        assert compare_deviation(Fraction(3, 4), p, Fraction(1, 4)) is Comparison.GEQ

    @given(
        st.integers(min_value=0, max_value=10),
        st.data(),
    )
    @settings(max_examples=300, deadline=None)
    def test_refinement_monotonicity(self, m, data):
        # extending the known prefix by one bit may resolve UNDECIDED but
        # never flips a settled verdict
        bits = tuple(data.draw(st.integers(0, 1)) for _ in range(m))
        prefix = DyadicExpansion(bits)
        x = Fraction(data.draw(st.integers(0, 64)), 64)
        eps = Fraction(1, 1 << data.draw(st.integers(1, 8)))
        before = compare_deviation(x, RealParam.from_prefix(prefix), eps)
        for nxt in (0, 1):
            after = compare_deviation(
                x, RealParam.from_prefix(prefix.extended(nxt)), eps
            )
            if before is not Comparison.UNDECIDED:
                assert after is before

    def test_eps_must_be_positive(self):
        with pytest.raises(ValueError):
            compare_deviation(Fraction(1, 2), P_01, Fraction(0))


class TestParamParsing:
    def test_rational_round_trip(self):
        assert parse_rational("5/16") == Fraction(5, 16)
        assert format_rational(Fraction(5, 16)) == "5/16"
        assert format_rational(Fraction(0)) == "0/1"

    def test_parse_param_forms(self):
        assert RealParam.parse("1/3").exact == Fraction(1, 3)
        pref = RealParam.parse("0.0101")
        assert pref.prefix.bits == (0, 1, 0, 1)
        assert pref.bounds() == (Fraction(5, 16), Fraction(3, 8))

    def test_bad_inputs(self):
        with pytest.raises(ParseError):
            parse_rational("x/y")
        with pytest.raises(OutOfRange):
            RealParam.parse("9/8")

    def test_empty_prefix_is_whole_interval(self):
        assert RealParam.parse("0.").bounds() == (Fraction(0), Fraction(1))
