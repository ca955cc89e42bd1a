import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossgate import DomainError, cosine_similarity, finite_diff_grad, log_sum_exp, max_rel_error
from lossgate.mathops import row_softmax


class TestCosineSimilarity:
    def test_identical_unit_vectors(self):
        assert cosine_similarity([1, 0, 0], [1, 0, 0]) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_colinear_scale_invariant(self):
        assert cosine_similarity([1, 2], [2, 4]) == pytest.approx(1.0, abs=1e-12)

    def test_zero_norm_names_left_side(self):
        with pytest.raises(DomainError, match="left"):
            cosine_similarity([0, 0], [1, 0])

    def test_zero_norm_names_right_side(self):
        with pytest.raises(DomainError, match="right"):
            cosine_similarity([1, 0], [0, 0])

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            cosine_similarity([1, 0], [1, 0, 0])

    @given(st.integers(2, 8), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_symmetric_and_clamped(self, dim, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=dim)
        b = rng.normal(size=dim)
        if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
            return
        assert cosine_similarity(a, b) == cosine_similarity(b, a)
        assert abs(cosine_similarity(a, b)) <= 1.0


class TestLogSumExp:
    def test_two_zeros(self):
        assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-15)

    def test_shift_invariance_at_1000(self):
        assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(1000.0 + math.log(2), abs=1e-9)

    def test_matches_direct_evaluation_at_small_magnitude(self):
        values = [-3.0, 1.0, 2.0]
        direct = math.log(sum(math.exp(v) for v in values))
        assert log_sum_exp(values) == pytest.approx(direct, rel=1e-12)

    def test_no_overflow_at_extremes(self):
        assert np.isfinite(log_sum_exp([1e4, -1e4]))
        assert log_sum_exp([1e4]) == pytest.approx(1e4)

    def test_empty_raises(self):
        with pytest.raises(DomainError):
            log_sum_exp([])

    @given(st.floats(-50, 50), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_constant_shift_property(self, shift, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=5)
        assert log_sum_exp(v + shift) == pytest.approx(log_sum_exp(v) + shift, rel=1e-12, abs=1e-10)


class TestFiniteDiff:
    def test_sum_of_squares(self):
        grad = finite_diff_grad(lambda x: float((x**2).sum()), np.array([1.0, 2.0]), h=1e-5)
        assert np.allclose(grad, [2.0, 4.0], atol=1e-6)

    def test_constant_function(self):
        grad = finite_diff_grad(lambda x: 3.5, np.ones((2, 3)))
        assert np.array_equal(grad, np.zeros((2, 3)))

    def test_argument_restored_bit_exactly(self):
        x = np.array([0.1, 0.2, 0.3])
        before = x.copy()
        finite_diff_grad(lambda v: float(v.sum()), x)
        assert np.array_equal(x, before)

    def test_nonpositive_step_rejected(self):
        with pytest.raises(DomainError):
            finite_diff_grad(lambda x: 0.0, np.ones(2), h=0.0)


def test_row_softmax_rows_sum_to_one():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(4, 7)) * 100
    p = row_softmax(z)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.all(p >= 0)


def test_max_rel_error_scales():
    assert max_rel_error(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert max_rel_error(np.array([1.0]), np.array([1.1])) == pytest.approx(0.1 / 1.1)
