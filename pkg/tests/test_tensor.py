import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughfilter.tensor import (
    GroupIncrement,
    dilate,
    exp_from_lie,
    exp_segment,
    grouplike_residual,
    homogeneous_norm,
    identity,
    inverse,
    lie_project_level3,
    tensor_mul,
    truncated_log,
)

from oracles import signature_riemann


def random_increment(rng, d, level=3, scale=1.0):
    return GroupIncrement(
        d=d,
        level=level,
        level1=scale * rng.standard_normal(d),
        level2=scale * rng.standard_normal((d, d)),
        level3=scale * rng.standard_normal((d, d, d)) if level == 3 else None,
    )


def max_gap(a, b):
    gap = np.max(np.abs(a.level1 - b.level1))
    gap = max(gap, np.max(np.abs(a.level2 - b.level2)))
    if a.level == 3:
        gap = max(gap, np.max(np.abs(a.level3 - b.level3)))
    return gap


class TestTensorMul:
    def test_identity_neutral(self):
        rng = np.random.default_rng(0)
        g = random_increment(rng, 3)
        e = identity(3, 3)
        assert max_gap(tensor_mul(e, g), g) == 0.0
        assert max_gap(tensor_mul(g, e), g) == 0.0

    def test_1d_exponentials_add(self):
        a = exp_segment(np.array([0.7]), level=2)
        b = exp_segment(np.array([1.1]), level=2)
        ab = tensor_mul(a, b)
        assert ab.level1[0] == pytest.approx(1.8)
        assert ab.level2[0, 0] == pytest.approx(1.8 ** 2 / 2.0, abs=1e-14)

    def test_two_segment_levy_area_against_riemann_oracle(self):
        # L-shaped path (1,0) then (0,1): the oracle integrates the iterated
        # integrals directly over the polyline.
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
        s1, s2, s3 = signature_riemann(pts, level=3, subdiv=32)
        g = tensor_mul(exp_segment(np.array([1.0, 0.0])), exp_segment(np.array([0.0, 1.0])))
        assert g.level2[0, 1] == pytest.approx(1.0, abs=1e-12)
        assert g.level2[1, 0] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(g.level1, s1, atol=1e-12)
        np.testing.assert_allclose(g.level2, s2, atol=1e-12)
        np.testing.assert_allclose(g.level3, s3, atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(1)
        with pytest.raises(ValueError):
            tensor_mul(random_increment(rng, 2), random_increment(rng, 3))
        with pytest.raises(ValueError):
            tensor_mul(random_increment(rng, 2, level=2), random_increment(rng, 2, level=3))

    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4))
    @settings(max_examples=25, deadline=None)
    def test_associativity(self, seed, d):
        rng = np.random.default_rng(seed)
        a, b, c = (random_increment(rng, d) for _ in range(3))
        lhs = tensor_mul(tensor_mul(a, b), c)
        rhs = tensor_mul(a, tensor_mul(b, c))
        assert max_gap(lhs, rhs) < 1e-12


class TestExpSegment:
    def test_line_levels(self):
        g = exp_segment(np.array([2.0]), level=3)
        assert g.level1[0] == 2.0
        assert g.level2[0, 0] == 2.0
        assert g.level3[0, 0, 0] == pytest.approx(4.0 / 3.0)

    def test_zero_is_identity(self):
        g = exp_segment(np.zeros(3), level=3)
        assert max_gap(g, identity(3, 3)) == 0.0

    def test_symmetric_square(self):
        g = exp_segment(np.array([1.0, 1.0]), level=2)
        np.testing.assert_allclose(g.level2, 0.5 * np.ones((2, 2)))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            exp_segment(np.array([np.nan, 1.0]))


class TestInverse:
    def test_identity(self):
        e = identity(2, 3)
        assert max_gap(inverse(e), e) == 0.0

    def test_segment_inverse_is_negated_segment(self):
        delta = np.array([0.3, -1.2])
        gap = max_gap(inverse(exp_segment(delta)), exp_segment(-delta))
        assert gap < 1e-14

    def test_random_inverse_multiplies_to_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            g = random_increment(rng, 2)
            e = tensor_mul(g, inverse(g))
            assert max_gap(e, identity(2, 3)) < 1e-14


class TestGrouplikeResidual:
    def test_segments_are_grouplike(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            delta = rng.uniform(-10, 10, size=rng.integers(1, 5))
            assert grouplike_residual(exp_segment(delta)) < 1e-13

    def test_symmetric_part_violation(self):
        d = 2
        v = np.array([1.5, -0.5])
        g = GroupIncrement(d=d, level=2, level1=v, level2=np.zeros((d, d)))
        # shuffle forces <g,i><g,i> = 2<g,ii>; with level2 = 0 the residual
        # is the largest squared level-1 entry
        assert grouplike_residual(g) == pytest.approx(np.max(v ** 2))

    def test_products_of_segments_grouplike(self):
        rng = np.random.default_rng(4)
        g = exp_segment(rng.standard_normal(3))
        for _ in range(5):
            g = tensor_mul(g, exp_segment(rng.standard_normal(3)))
        assert grouplike_residual(g) < 1e-12


class TestHomogeneousNorm:
    def test_identity_zero(self):
        assert homogeneous_norm(identity(4, 3)) == 0.0

    def test_level1_segment(self):
        assert homogeneous_norm(exp_segment(np.array([3.0]), level=1)) == 3.0

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_dilation_homogeneity(self, seed):
        rng = np.random.default_rng(seed)
        g = random_increment(rng, 3)
        assert homogeneous_norm(dilate(g, 2.0)) == pytest.approx(2.0 * homogeneous_norm(g))

    def test_subadditivity_constant(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(200):
            d = rng.integers(1, 5)
            a, b = random_increment(rng, d), random_increment(rng, d)
            denom = homogeneous_norm(a) + homogeneous_norm(b)
            worst = max(worst, homogeneous_norm(tensor_mul(a, b)) / denom)
        assert worst <= 3.0


class TestLieMachinery:
    def test_log_exp_roundtrip_on_grouplike(self):
        rng = np.random.default_rng(5)
        g = tensor_mul(exp_segment(rng.standard_normal(3)), exp_segment(rng.standard_normal(3)))
        l1, l2, l3 = truncated_log(g)
        # log of a group-like element is Lie: antisymmetric at level 2,
        # fixed by the Dynkin projection at level 3
        assert np.max(np.abs(l2 + l2.T)) < 1e-13
        np.testing.assert_allclose(lie_project_level3(l3), l3, atol=1e-12)
        back = exp_from_lie(l1, l2, l3, level=3)
        assert max_gap(back, g) < 1e-12

    def test_projection_output_exponentiates_grouplike(self):
        rng = np.random.default_rng(6)
        l1 = rng.standard_normal(3)
        l2 = rng.standard_normal((3, 3))
        l2 = 0.5 * (l2 - l2.T)
        l3 = lie_project_level3(rng.standard_normal((3, 3, 3)))
        g = exp_from_lie(l1, l2, l3, level=3)
        assert grouplike_residual(g) < 1e-12
