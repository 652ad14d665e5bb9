import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gacoop.errors import ContractViolation, DegenerateVectorError, DimensionMismatchError
from gacoop.numerics import dot, entropy, l2_normalize, log_softmax, matvec, softmax
from gacoop.rng import SeededRng

# independently computed with 40-digit arithmetic (exp-normalize of [2, 1])
SOFTMAX_2_1 = (0.7310585786300049, 0.2689414213699951)

finite_floats = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


class TestSoftmax:
    def test_uniform_on_equal_logits(self):
        assert np.allclose(softmax([0.0, 0.0, 0.0]), [1 / 3] * 3, atol=1e-15)

    def test_stable_under_huge_gap(self):
        out = softmax([1000.0, 0.0])
        assert abs(out[0] - 1.0) < 1e-12
        assert abs(out[1]) < 1e-12

    def test_two_one(self):
        out = softmax([2.0, 1.0])
        assert abs(out[0] - SOFTMAX_2_1[0]) < 1e-15
        assert abs(out[1] - SOFTMAX_2_1[1]) < 1e-15

    def test_single_entry(self):
        assert softmax([5.0])[0] == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ContractViolation):
            softmax([])

    def test_non_finite_rejected(self):
        with pytest.raises(ContractViolation):
            softmax([np.nan, 0.0])

    def test_sums_to_one_over_random_draws(self):
        rng = SeededRng(2)
        for _ in range(1000):
            n = 1 + rng.next_u64() % 40
            z = rng.uniform(-1e3, 1e3, n=int(n))
            out = softmax(z)
            assert abs(out.sum() - 1.0) < 1e-12
            # entries are positive in exact arithmetic; huge gaps underflow to 0.0
            assert np.all(out >= 0) and np.all(out <= 1.0)

    @given(
        st.lists(finite_floats, min_size=1, max_size=30),
        st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
    )
    @settings(max_examples=200)
    def test_shift_invariance(self, logits, c):
        base = softmax(logits)
        shifted = softmax(np.asarray(logits) + c)
        assert np.abs(base - shifted).max() < 1e-12

    def test_log_softmax_consistent(self):
        z = SeededRng(3).uniform(-5, 5, n=8)
        assert np.abs(np.exp(log_softmax(z)) - softmax(z)).max() < 1e-14


class TestEntropy:
    def test_uniform_four(self):
        assert abs(entropy([0.25] * 4) - math.log(4)) < 1e-12

    def test_one_hot(self):
        assert entropy([0.0, 1.0, 0.0]) == 0.0

    def test_zero_convention(self):
        assert abs(entropy([0.5, 0.5, 0.0, 0.0]) - math.log(2)) < 1e-12

    def test_negative_entry_rejected(self):
        with pytest.raises(ContractViolation):
            entropy([1.1, -0.1])

    def test_bad_sum_rejected(self):
        with pytest.raises(ContractViolation):
            entropy([0.5, 0.6])

    @given(st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=1, max_size=20))
    @settings(max_examples=200)
    def test_bounds_and_max_at_uniform(self, weights):
        p = np.asarray(weights) / np.sum(weights)
        h = entropy(p)
        n = p.size
        assert -1e-12 <= h <= math.log(n) + 1e-12
        assert h <= entropy([1.0 / n] * n) + 1e-12


class TestNormalize:
    def test_three_four(self):
        assert np.allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-15)

    def test_unit_is_identity(self):
        v = SeededRng(4).unit_vector(8)
        assert np.abs(l2_normalize(v) - v).max() < 1e-12

    def test_idempotent(self):
        rng = SeededRng(6)
        for _ in range(100):
            v = rng.normal(n=10)
            once = l2_normalize(v)
            assert np.abs(l2_normalize(once) - once).max() < 1e-12

    def test_zero_rejected(self):
        with pytest.raises(DegenerateVectorError):
            l2_normalize([0.0, 0.0])


class TestDotMatvec:
    def test_orthogonal(self):
        assert dot([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_negative(self):
        assert dot([1.0, -1.0], [0.0, 1.0]) == -1.0

    def test_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            dot([1.0], [1.0, 2.0])

    def test_matvec_identity(self):
        v = SeededRng(8).normal(n=5)
        assert np.array_equal(matvec(np.eye(5), v), v)

    def test_matvec_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            matvec(np.eye(3), [1.0, 2.0])

    def test_bitwise_deterministic(self):
        rng = SeededRng(9)
        a = rng.normal(n=512)
        b = rng.normal(n=512)
        m = rng.normal(n=64 * 512).reshape(64, 512)
        assert dot(a, b) == dot(a.copy(), b.copy())
        assert np.array_equal(matvec(m, a), matvec(m.copy(), a.copy()))
