from fractions import Fraction

import numpy as np
import pytest

from hippoc import (
    CauchyMC,
    DiagonalMC,
    OracleMC,
    Outcome,
    SllnMC,
    BitPrefix,
    brute_force_s4,
    cauchy_test,
    chebyshev_check,
    checkpoint_size,
    diagonal_member,
    exact_union_measure,
    fourth_central_moment,
    mc_estimate,
    moment_s4,
    oracle_test,
    slln_test,
)
from hippoc import DEFAULT_FAMILY
from hippoc.bitstream import bernoulli_matrix, substream_seed
from hippoc.errors import DegenerateP, PrefixTooShort, TooLarge, ZeroTrials
from hippoc.verify import (
    _binomial_pmf,
    _cauchy_fire_mask,
    _counts_matrix,
    _diagonal_fires,
    _oracle_fire_mask,
    _slln_fire_mask,
    wilson_interval,
)


class TestMoments:
    def test_kp_at_half(self):
        assert fourth_central_moment(Fraction(1, 2)) == Fraction(1, 16)

    def test_s4_two_flips_fair_coin(self):
        # hand enumeration: S_2 in {-1, 0, 1} with probabilities 1/4, 1/2, 1/4
        assert moment_s4(2, Fraction(1, 2)).formula_value == Fraction(1, 2)
        assert brute_force_s4(2, Fraction(1, 2)) == Fraction(1, 2)

    @pytest.mark.parametrize("p", [Fraction(1, 2), Fraction(1, 3), Fraction(3, 10)])
    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
    def test_formula_equals_enumeration(self, n, p):
        assert moment_s4(n, p).formula_value == brute_force_s4(n, p)

    def test_kp_bound_on_grid(self):
        for k in range(65):
            assert fourth_central_moment(Fraction(k, 64)) <= Fraction(1, 2)

    def test_brute_force_size_cap(self):
        with pytest.raises(TooLarge):
            brute_force_s4(15, Fraction(1, 2))

    def test_degenerate_bias_is_zero(self):
        assert brute_force_s4(1, Fraction(0)) == 0
        assert moment_s4(4, Fraction(1)).formula_value == 0


class TestChebyshev:
    def test_fair_coin_four_flips_two_sigma(self):
        # only counts 0 and 4 reach a full sigma away: tail = 2/16
        rep = chebyshev_check(4, Fraction(1, 2), 2)
        assert rep.formula_value == Fraction(1, 8)
        assert rep.bound_value == Fraction(1, 4)
        assert rep.bound_satisfied

    def test_k_one_vacuous_but_true(self):
        rep = chebyshev_check(16, Fraction(1, 4), 1)
        assert rep.formula_value <= 1 == rep.bound_value

    def test_degenerate_p(self):
        with pytest.raises(DegenerateP):
            chebyshev_check(4, Fraction(0), 2)

    def test_small_grid(self):
        for n in (4, 16):
            for k in (1, 2, 3):
                for p in (Fraction(1, 4), Fraction(2, 3)):
                    rep = chebyshev_check(n, p, k)
                    assert rep.formula_value <= rep.bound_value

    def test_pmf_sums_to_one(self):
        assert sum(_binomial_pmf(40, Fraction(2, 7))) == 1


def _union_oracle_two_levels(p: Fraction, d: int) -> Fraction:
    """Inclusion-exclusion oracle for the union measure with b_max = 2.

    Independent of the survival DP: P(A1 u A2) = P(A1) + P(A2) - P(A1 n A2)
    from exact binomial tables.
    """

    def fires(count, b):
        size = checkpoint_size(b)
        return abs(Fraction(count, size) - p) >= Fraction(1, 1 << b)

    pmf4 = _binomial_pmf(4, p)
    pmf28 = _binomial_pmf(28, p)
    pmf32 = _binomial_pmf(32, p)
    if d == 2:
        return sum((q for c, q in enumerate(pmf32) if fires(c, 2)), Fraction(0))
    p1 = sum((q for c, q in enumerate(pmf4) if fires(c, 1)), Fraction(0))
    p2 = sum((q for c, q in enumerate(pmf32) if fires(c, 2)), Fraction(0))
    both = Fraction(0)
    for c1, q1 in enumerate(pmf4):
        if not fires(c1, 1):
            continue
        for j, q2 in enumerate(pmf28):
            if fires(c1 + j, 2):
                both += q1 * q2
    return p1 + p2 - both


class TestExactUnionMeasure:
    def test_level_one_fair_coin(self):
        est = exact_union_measure(Fraction(1, 2), 1, 1)
        assert est.value == Fraction(1, 8)
        assert est.satisfied

    @pytest.mark.parametrize("p", [Fraction(0), Fraction(1)])
    def test_degenerate_bias_never_fires(self, p):
        assert exact_union_measure(p, 1, 3).value == 0

    @pytest.mark.parametrize("d", [1, 2])
    @pytest.mark.parametrize("p", [Fraction(1, 2), Fraction(1, 3), Fraction(3, 16), Fraction(9, 10)])
    def test_against_inclusion_exclusion_oracle(self, p, d):
        assert exact_union_measure(p, d, 2).value == _union_oracle_two_levels(p, d)

    def test_monotone_in_d_and_bmax(self):
        for p in (Fraction(1, 3), Fraction(5, 16)):
            values = {
                (d, b): exact_union_measure(p, d, b).value
                for d in (1, 2, 3)
                for b in (3, 4)
            }
            for d in (1, 2):
                assert values[(d, 3)] >= values[(d + 1, 3)]
            for d in (1, 2, 3):
                assert values[(d, 4)] >= values[(d, 3)]

    def test_bound_on_grid(self):
        for k in range(0, 17, 3):
            p = Fraction(k, 16)
            for d in (1, 2, 3):
                est = exact_union_measure(p, d, 3)
                assert est.value <= est.bound

    def test_size_cap(self):
        with pytest.raises(TooLarge):
            exact_union_measure(Fraction(1, 2), 1, 6)


class TestWilson:
    def test_endpoints(self):
        lo, hi = wilson_interval(0, 100)
        assert lo == 0.0 and 0 < hi < 0.1
        lo, hi = wilson_interval(100, 100)
        assert hi == 1.0 and 0.9 < lo < 1

    def test_contains_point_estimate(self):
        lo, hi = wilson_interval(37, 250)
        assert lo < 37 / 250 < hi


class TestBatchedEvaluators:
    """The vectorised firing masks must agree with the scalar verdicts."""

    def setup_method(self):
        self.p = Fraction(3, 10)
        self.seeds = np.array([substream_seed(13, t) for t in range(40)], dtype=np.uint64)
        self.bits = bernoulli_matrix(self.p, self.seeds, checkpoint_size(4))
        self.streams = [BitPrefix.from_uint8(row) for row in self.bits]
        self.counts = _counts_matrix(self.bits, 4)

    def test_counts_match_checkpoints(self):
        for row, y in zip(self.counts, self.streams):
            assert tuple(int(c) for c in row) == tuple(
                y.ones_in_prefix(checkpoint_size(b)) for b in range(1, 5)
            )

    def test_oracle_mask(self):
        spec = OracleMC(p=Fraction(1, 2), d=1, b_max=4)
        mask = _oracle_fire_mask(self.counts, spec)
        for fired, y in zip(mask, self.streams):
            verdict = oracle_test(y, Fraction(1, 2), 1, 4)
            assert bool(fired) == (verdict.outcome is Outcome.FAIL)

    def test_cauchy_mask(self):
        spec = CauchyMC(d=1, b_max=4)
        mask = _cauchy_fire_mask(self.counts, spec)
        for fired, y in zip(mask, self.streams):
            verdict = cauchy_test(y, 1, 4)
            assert bool(fired) == (verdict.outcome is Outcome.FAIL)

    def test_slln_mask(self):
        spec = SllnMC(q1=Fraction(1, 5), q2=Fraction(2, 5), n_start=16, n_max=1024)
        mask = _slln_fire_mask(self.bits, spec)
        for fired, y in zip(mask, self.streams):
            verdict = slln_test(y, spec.q1, spec.q2, spec.n_start, spec.n_max)
            assert bool(fired) == (verdict.outcome is Outcome.FAIL)

    def test_diagonal_fires(self):
        spec = DiagonalMC(n=2, k_max=6, b_max=4)
        for row, y in zip(self.counts, self.streams):
            want = diagonal_member(y, DEFAULT_FAMILY, d=2, n=2, k_max=6, resolution=4)
            assert _diagonal_fires(row, spec, DEFAULT_FAMILY) == (want.outcome == "IN")


class TestMcEstimate:
    def test_zero_trials(self):
        with pytest.raises(ZeroTrials):
            mc_estimate(CauchyMC(d=1, b_max=2), Fraction(1, 2), 0, 32, seed=1)

    def test_prefix_too_short(self):
        with pytest.raises(PrefixTooShort):
            mc_estimate(CauchyMC(d=1, b_max=3), Fraction(1, 2), 10, 100, seed=1)

    def test_matches_exact_level_one(self):
        est = mc_estimate(OracleMC(p=Fraction(1, 2), d=1, b_max=1), Fraction(1, 2), 20_000, 4, seed=3)
        exact = exact_union_measure(Fraction(1, 2), 1, 1).value
        half = (est.ci_high - est.ci_low) / 2
        assert abs(float(est.value) - float(exact)) <= half

    def test_deterministic_and_batch_invariant(self):
        spec = CauchyMC(d=2, b_max=3)
        a = mc_estimate(spec, Fraction(1, 3), 3000, 256, seed=9)
        b = mc_estimate(spec, Fraction(1, 3), 3000, 256, seed=9)
        c = mc_estimate(spec, Fraction(1, 3), 3000, 256, seed=9, batch=111)
        assert a.fires == b.fires == c.fires

    def test_thread_count_does_not_change_results(self, monkeypatch):
        spec = OracleMC(p=Fraction(1, 3), d=1, b_max=3)
        base = mc_estimate(spec, Fraction(1, 3), 4000, 256, seed=5, batch=500)
        monkeypatch.setenv("HIPPOC_THREADS", "4")
        threaded = mc_estimate(spec, Fraction(1, 3), 4000, 256, seed=5, batch=500)
        assert base.fires == threaded.fires

    def test_coverage_sweep(self):
        # the exact value 1/8 should land inside the 99% band in nearly
        # every seeded run; seeds are pinned so this is deterministic
        exact = float(exact_union_measure(Fraction(1, 2), 1, 1).value)
        spec = OracleMC(p=Fraction(1, 2), d=1, b_max=1)
        inside = 0
        for seed in range(30):
            est = mc_estimate(spec, Fraction(1, 2), 2000, 4, seed=seed)
            half = (est.ci_high - est.ci_low) / 2
            inside += abs(float(est.value) - exact) <= half
        assert inside >= 28

    def test_slln_bound_respected(self):
        spec = SllnMC(q1=Fraction(1, 10), q2=Fraction(9, 10), n_start=64, n_max=512)
        est = mc_estimate(spec, Fraction(1, 2), 2000, 512, seed=2)
        assert est.satisfied
        assert est.method == "monte-carlo"
        assert est.ci_method == "wilson-99"
