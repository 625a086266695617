import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gq.centroids import build_linear_centroids
from gq.errors import EmptyInput, NonDifferentiablePoint
from gq.quantize import (
    hard_quantize,
    soft_assign,
    soft_quantize,
    soft_quantize_jacobian,
)


def central_difference(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2.0 * h)


class TestSoftAssign:
    def test_symmetric_split(self):
        a = soft_assign([0.0], [-1.0, 1.0], 50.0)
        np.testing.assert_allclose(a, [[0.5, 0.5]], atol=1e-15)

    def test_closed_form_two_centroids(self):
        # p(z=0) = 1 / (1 + e^{-0.2 alpha}) for w=0.4, z=[0,1]
        a = soft_assign([0.4], [0.0, 1.0], 10.0)
        expected = 1.0 / (1.0 + np.exp(-2.0))
        np.testing.assert_allclose(a[0], [expected, 1.0 - expected], rtol=1e-12)
        assert a[0, 0] == pytest.approx(0.88080, abs=5e-6)
        assert a[0, 1] == pytest.approx(0.11920, abs=5e-6)

    def test_one_hot_limit(self):
        a = soft_assign([0.4], [0.0, 1.0], 1e4)
        np.testing.assert_allclose(a[0], [1.0, 0.0], atol=1e-12)

    def test_empty_inputs(self):
        with pytest.raises(EmptyInput):
            soft_assign([], [0.0, 1.0], 10.0)
        with pytest.raises(EmptyInput):
            soft_assign([0.1], [], 10.0)

    def test_single_centroid_rejected(self):
        with pytest.raises(ValueError):
            soft_assign([0.1], [0.5], 10.0)

    def test_alpha_below_one_rejected(self):
        with pytest.raises(ValueError):
            soft_assign([0.1], [0.0, 1.0], 0.5)

    def test_huge_alpha_does_not_overflow(self):
        a = soft_assign([0.31], [-1.0, 0.0, 1.0], 1e18)  # clamped internally
        assert np.isfinite(a).all()
        np.testing.assert_allclose(a[0], [0.0, 1.0, 0.0], atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(
        n=st.integers(1, 40),
        b=st.integers(1, 6),
        alpha=st.floats(1.0, 1e4),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_rows_stochastic(self, n, b, alpha, seed):
        rng = np.random.default_rng(seed)
        w = rng.uniform(-2, 2, n)
        z = np.sort(rng.uniform(-1, 1, 1 << b)) if b > 1 else np.array([-1.0, 1.0])
        a = soft_assign(w, z, alpha)
        assert a.min() >= 0.0 and a.max() <= 1.0
        np.testing.assert_allclose(a.sum(axis=1), np.ones(n), atol=1e-9)


class TestSoftQuantize:
    def test_matches_assignment_mixture(self):
        out = soft_quantize([0.4], [0.0, 1.0], 10.0)
        assert out[0] == pytest.approx(0.11920, abs=5e-6)

    def test_symmetric_zero(self):
        z = build_linear_centroids(4)
        for alpha in (1.0, 17.0, 400.0):
            out = soft_quantize([0.0], z, alpha)
            assert out[0] == pytest.approx(0.0, abs=1e-12)

    def test_hard_limit(self):
        rng = np.random.default_rng(3)
        w = rng.uniform(-1, 1, 200)
        z = build_linear_centroids(4)
        # exclude near-midpoint weights: the one-hot limit needs alpha*gap
        # large, per the annealing-limit rule
        d = np.sort(np.abs(w[:, None] - z.values[None, :]), axis=1)
        w = w[(d[:, 1] - d[:, 0]) * 1e4 > 40]
        assert len(w) > 150
        soft = soft_quantize(w, z, 1e4)
        hard, _ = hard_quantize(w, z)
        np.testing.assert_allclose(soft, hard, atol=1e-10)

    def test_output_within_centroid_range(self):
        rng = np.random.default_rng(4)
        w = rng.uniform(-3, 3, 500)
        z = np.array([-0.5, -0.1, 0.2, 0.4])
        out = soft_quantize(w, z, 2.0)
        assert out.min() >= z.min() - 1e-15
        assert out.max() <= z.max() + 1e-15

    def test_monotone_in_w(self):
        rng = np.random.default_rng(5)
        w = np.sort(rng.uniform(-1.5, 1.5, 1000))
        z = np.sort(rng.uniform(-1, 1, 32))
        for alpha in (1.0, 25.0, 400.0):
            out = soft_quantize(w, z, alpha)
            assert np.all(np.diff(out) >= -1e-12)

    def test_annealing_limit_gap_rule(self):
        # alpha * (distance gap to the two nearest centroids) > 40
        # implies the soft output is within 1e-10 of the hard one.
        rng = np.random.default_rng(6)
        z = np.sort(rng.uniform(-1, 1, 16))
        w = rng.uniform(-1, 1, 2000)
        d = np.sort(np.abs(w[:, None] - z[None, :]), axis=1)
        gap = d[:, 1] - d[:, 0]
        keep = gap > 1e-4
        w, gap = w[keep], gap[keep]
        alpha = np.minimum(50.0 / gap, 1e6)
        ok = alpha * gap > 40
        w, alpha = w[ok], alpha[ok]
        assert len(w) > 1500
        hard, _ = hard_quantize(w, z)
        soft = np.array([soft_quantize([wi], z, ai)[0] for wi, ai in zip(w, alpha)])
        assert np.max(np.abs(soft - hard)) < 1e-10


class TestJacobian:
    def test_matches_finite_differences(self):
        z = [0.0, 1.0]
        jac = soft_quantize_jacobian(0.4, z, 10.0)
        fd = central_difference(lambda x: soft_quantize([x], z, 10.0)[0], 0.4)
        assert jac == pytest.approx(fd, rel=1e-5)

    def test_plateau_at_large_alpha(self):
        jac = soft_quantize_jacobian(0.4, [0.0, 1.0], 500.0)
        assert abs(jac) < 1e-8

    def test_near_symmetric_point(self):
        # w=0 ties between -1 and 1 (non-differentiable in the abs terms),
        # so probe just off-center instead.
        z = [-1.0, 1.0]
        jac = soft_quantize_jacobian(0.1, z, 50.0)
        fd = central_difference(lambda x: soft_quantize([x], z, 50.0)[0], 0.1)
        assert jac == pytest.approx(fd, rel=1e-5)

    def test_centroid_point_rejected(self):
        with pytest.raises(NonDifferentiablePoint):
            soft_quantize_jacobian(0.25, [0.0, 0.25, 1.0], 10.0)

    def test_random_points_against_fd(self):
        rng = np.random.default_rng(7)
        z = np.sort(rng.uniform(-1, 1, 8))
        checked = 0
        while checked < 100:
            w = float(rng.uniform(-1, 1))
            if np.min(np.abs(w - z)) < 1e-4:
                continue
            alpha = float(rng.uniform(1, 60))
            jac = soft_quantize_jacobian(w, z, alpha)
            fd = central_difference(lambda x: soft_quantize([x], z, alpha)[0], w)
            assert jac == pytest.approx(fd, rel=1e-5, abs=1e-9)
            checked += 1


class TestHardQuantize:
    def test_nearest(self):
        vals, idx = hard_quantize([0.3], [0.0, 0.25, 0.5])
        assert vals.tolist() == [0.25]
        assert idx.tolist() == [1]

    def test_tie_breaks_to_lower_index(self):
        vals, idx = hard_quantize([0.125], [0.0, 0.25])
        assert vals.tolist() == [0.0]
        assert idx.tolist() == [0]

    def test_agrees_with_soft_argmax(self):
        rng = np.random.default_rng(8)
        w = rng.uniform(-1, 1, 300)
        z = np.sort(rng.uniform(-1, 1, 16))
        _, idx = hard_quantize(w, z)
        a = soft_assign(w, z, 1e4)
        np.testing.assert_array_equal(idx, a.argmax(axis=1))

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        w = rng.uniform(-1, 1, 500)
        z = np.sort(rng.uniform(-1, 1, 32))
        once, idx1 = hard_quantize(w, z)
        twice, idx2 = hard_quantize(once, z)
        np.testing.assert_array_equal(once, twice)
        np.testing.assert_array_equal(idx1, idx2)

    def test_output_is_a_centroid(self):
        rng = np.random.default_rng(10)
        w = rng.uniform(-5, 5, 100)
        z = np.sort(rng.uniform(-1, 1, 7))
        vals, _ = hard_quantize(w, z)
        assert set(vals.tolist()) <= set(z.tolist())

    def test_empty_centroids(self):
        with pytest.raises(EmptyInput):
            hard_quantize([0.1], [])
