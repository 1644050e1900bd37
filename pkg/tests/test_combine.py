import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from anml import combine
from anml.combine import (BLEND, KRUM_FALLBACK, SKIP_SELECTION, apply_temporal, multiplicative, n_keep, pearson,
                          softmax, softmax_blend, two_stage_adaptive, weighted_sample, weighted_select)

unit = st.floats(0.0, 1.0, allow_nan=False)


def vec(n_min=3, n_max=60):
    return st.integers(n_min, n_max).flatmap(lambda n: st.tuples(*(arrays(np.float64, n, elements=unit) for _ in range(3))))


class TestMultiplicative:
    def test_product_values(self):
        w = multiplicative([0.5, 1.0], [0.8, 0.2], [0.5, 1.0], [1.0, 0.5]).w
        np.testing.assert_allclose(w, [0.2, 0.1])

    def test_suppression_chain(self):
        # v=0.1, r=0.15 caps the weight at 1.5% of q*T; three such hops compound
        w = multiplicative([1.0], [0.1], [0.15]).w[0]
        assert w == pytest.approx(0.015, abs=0)
        assert Fraction("0.1") * Fraction("0.15") == Fraction("0.015")
        assert Fraction("0.015") ** 3 == Fraction("3.375e-6")

    @settings(max_examples=100, deadline=None)
    @given(vec())
    def test_suppression_bound(self, arrs):
        q, T, _ = arrs
        w = multiplicative(q, np.full(len(q), 0.1), np.full(len(q), 0.15), T).w
        assert np.all(w <= 0.015 * q * T)

    def test_reduces_to_krum(self):
        q = np.random.default_rng(0).random(40)
        ones = np.ones(40)
        np.testing.assert_array_equal(weighted_select(multiplicative(q, ones, ones, ones).w, 0.7),
                                      weighted_select(q, 0.7))


class TestSoftmaxBlend:
    def test_hand_computed(self):
        q = np.array([0.0, 1.0])
        s_v = np.array([1.0, 1.0])
        r = np.array([1.0, 0.0])
        e = math.e
        want = 0.5 * np.array([1, e]) / (1 + e) + 0.5 * np.array([e, 1]) / (1 + e)
        np.testing.assert_allclose(softmax_blend(q, s_v, r).w, want, rtol=1e-14)

    def test_alpha_one_is_softmax_of_q(self):
        q = np.array([0.1, 0.4, 0.9])
        np.testing.assert_allclose(softmax_blend(q, q, q, alpha=1.0, tau_s=0.5).w, softmax(q / 0.5))

    @settings(max_examples=200, deadline=None)
    @given(vec(), st.floats(0.0, 1.0), st.floats(0.05, 5.0))
    def test_sums_to_one(self, arrs, alpha, tau):
        q, v, r = arrs
        w = softmax_blend(q, v, r, alpha, tau).w
        assert abs(w.sum() - 1.0) <= 1e-9
        assert np.all(w > 0)

    def test_rejects_bad_temperature(self):
        with pytest.raises(ValueError):
            softmax_blend([1, 2, 3], [1, 1, 1], [1, 1, 1], tau_s=0)


class TestTwoStage:
    def test_homogeneous_skips(self):
        wv = two_stage_adaptive(np.array([0.1, 0.5, 0.9]), np.full(3, 0.8), np.full(3, 0.9))
        assert wv.gate.branch == SKIP_SELECTION
        assert wv.skip_selection
        np.testing.assert_allclose(wv.w, 1 / 3)

    def test_correlated_blends(self):
        q = np.array([0.1, 0.5, 0.9, 1.0])
        v = np.array([0.1, 0.5, 0.8, 0.9])
        wv = two_stage_adaptive(q, v, np.ones(4))
        assert wv.gate.branch == BLEND
        assert wv.gate.rho_c == pytest.approx(stats.pearsonr(q, v).statistic)
        np.testing.assert_allclose(wv.w, softmax_blend(q, v, np.ones(4)).w)

    def test_anticorrelated_falls_back(self):
        q = np.array([0.1, 0.5, 0.9, 1.0])
        v = np.array([0.9, 0.5, 0.2, 0.1])
        wv = two_stage_adaptive(q, v, np.ones(4))
        assert wv.gate.branch == KRUM_FALLBACK
        np.testing.assert_allclose(wv.w, q / q.sum())
        np.testing.assert_array_equal(weighted_select(wv.w, 0.5), weighted_select(q, 0.5))

    def test_threshold_is_strict(self):
        # min(s) equal to tau_h does not skip
        wv = two_stage_adaptive(np.array([0.2, 0.4, 0.6]), np.array([0.35, 0.5, 0.6]), np.ones(3), tau_h=0.35)
        assert wv.gate.branch != SKIP_SELECTION

    @settings(max_examples=200, deadline=None)
    @given(vec())
    def test_sums_to_one_and_branch_known(self, arrs):
        q, v, r = arrs
        wv = two_stage_adaptive(q, v, r)
        assert abs(wv.w.sum() - 1.0) <= 1e-9
        assert wv.gate.branch in (SKIP_SELECTION, BLEND, KRUM_FALLBACK)


class TestPearson:
    def test_matches_scipy(self):
        a = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        b = np.array([2.1, 3.9, 6.2, 7.8, 10.1])
        assert pearson(a, b) == pytest.approx(stats.pearsonr(a, b).statistic, rel=1e-12)

    def test_constant_input_is_zero(self):
        assert pearson([1, 1, 1], [1, 2, 3]) == 0.0


class TestSelection:
    def test_keep_count_rounds_half_up(self):
        assert n_keep(10, 0.7) == 7
        assert n_keep(5, 0.5) == 3
        assert n_keep(3, 0.01) == 1

    def test_ties_go_to_lower_index(self):
        np.testing.assert_array_equal(weighted_select([1.0, 1.0, 1.0, 0.5], 0.5), [0, 1])

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.integers(1, 80), elements=st.floats(0.0, 1.0)), st.sampled_from([1e-6, 1.0, 1e6]))
    def test_scale_invariant(self, w, c):
        np.testing.assert_array_equal(weighted_select(c * w, 0.7), weighted_select(w, 0.7))

    def test_selects_largest(self):
        w = np.array([0.3, 0.9, 0.1, 0.7, 0.5])
        np.testing.assert_array_equal(weighted_select(w, 0.6), [1, 3, 4])

    def test_sampling_frequencies(self):
        # w = (2, 1): index 0 drawn with probability 2/3
        draws = weighted_sample([2.0, 1.0], 60000, seed=1)
        freq = np.bincount(draws, minlength=2) / len(draws)
        np.testing.assert_allclose(freq, [2 / 3, 1 / 3], atol=0.01)

    def test_sampling_rejects_zero_weights(self):
        with pytest.raises(ValueError):
            weighted_sample([0.0, 0.0], 3)


def test_temporal_renormalizes_l1_weights():
    wv = combine.WeightVector(np.array([0.5, 0.5]), "l1")
    out = apply_temporal(wv, [1.0, math.exp(-0.7)])
    assert out.w.sum() == pytest.approx(1.0)
    assert out.w[1] / out.w[0] == pytest.approx(math.exp(-0.7))
