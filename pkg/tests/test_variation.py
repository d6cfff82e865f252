from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughfilter.variation import (
    SampledFunction1D,
    SampledFunction2D,
    p_variation,
    rho_var_2d,
    young_integral_1d,
    young_integral_2d,
)


def brute_force_pvar(times, values, p):
    """Exhaustive sup over all subsets of interior points (the oracle)."""
    n = len(times)
    interior = list(range(1, n - 1))
    best = 0.0
    for r in range(len(interior) + 1):
        for combo in combinations(interior, r):
            idx = [0] + list(combo) + [n - 1]
            s = sum(
                np.linalg.norm(values[idx[k + 1]] - values[idx[k]]) ** p
                for k in range(len(idx) - 1)
            )
            best = max(best, s)
    return best ** (1.0 / p)


class TestPVariation:
    def test_monotone_path_total_variation(self):
        f = SampledFunction1D(np.linspace(0, 1, 20), np.linspace(0, 3, 20) ** 2)
        assert p_variation(f, 1.0) == pytest.approx(9.0)

    def test_two_points(self):
        f = SampledFunction1D(np.array([0.0, 1.0]), np.array([0.0, 3.0]))
        for p in (1.0, 1.7, 2.0, 3.5):
            assert p_variation(f, p) == pytest.approx(3.0)

    def test_matches_brute_force_enumeration(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            times = np.sort(rng.uniform(0, 1, 10))
            times[0], times[-1] = 0.0, 1.0
            values = rng.standard_normal(10)
            f = SampledFunction1D(times, values)
            p = rng.uniform(1.0, 3.0)
            assert p_variation(f, p) == pytest.approx(
                brute_force_pvar(times, values[:, None], p), rel=1e-12)

    def test_p_below_one_rejected(self):
        f = SampledFunction1D(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            p_variation(f, 0.5)

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_monotone_nonincreasing_in_p(self, seed):
        rng = np.random.default_rng(seed)
        f = SampledFunction1D(np.linspace(0, 1, 12), rng.standard_normal((12, 2)))
        ps = [1.0, 1.5, 2.0, 3.0, 4.0]
        vals = [p_variation(f, p) for p in ps]
        assert all(a >= b - 1e-12 for a, b in zip(vals[:-1], vals[1:]))

    def test_power_is_superadditive_control(self):
        rng = np.random.default_rng(13)
        t = np.linspace(0, 1, 30)
        v = rng.standard_normal(30)
        p = 2.3
        for split in (7, 15, 22):
            left = p_variation(SampledFunction1D(t[: split + 1], v[: split + 1]), p) ** p
            right = p_variation(SampledFunction1D(t[split:], v[split:]), p) ** p
            whole = p_variation(SampledFunction1D(t, v), p) ** p
            assert left + right <= whole + 1e-10


class TestRhoVar2D:
    def test_product_function_factorizes(self):
        s = np.linspace(0, 1, 17)
        R = SampledFunction2D(s, s, np.outer(s, s))
        out = rho_var_2d(R, 1.0)
        assert out.lower_bound
        assert out.value == pytest.approx(1.0)

    def test_brownian_min_covariance(self):
        s = np.linspace(0, 1, 33)
        R = SampledFunction2D(s, s, np.minimum.outer(s, s))
        assert rho_var_2d(R, 1.0).value == pytest.approx(1.0, rel=1e-10)

    def test_degenerate_rectangle(self):
        s = np.linspace(0, 1, 9)
        R = SampledFunction2D(s, s, np.minimum.outer(s, s))
        assert rho_var_2d(R, 1.3, rect=(0.0, 1.0, 0.5, 0.5)).value == 0.0

    def test_rect_outside_grid_rejected(self):
        s = np.linspace(0, 1, 9)
        R = SampledFunction2D(s, s, np.outer(s, s))
        with pytest.raises(ValueError):
            rho_var_2d(R, 1.0, rect=(0.0, 2.0, 0.0, 1.0))

    def test_tensor_product_general_factors(self):
        s = np.linspace(0, 1, 17)
        a = np.sin(3 * s)
        c = s ** 2
        R = SampledFunction2D(s, s, np.outer(a, c))
        tv_a = np.abs(np.diff(a)).sum()
        tv_c = np.abs(np.diff(c)).sum()
        assert rho_var_2d(R, 1.0).value == pytest.approx(tv_a * tv_c, rel=1e-10)


class TestYoung1D:
    def test_linear_times_linear(self):
        t = np.linspace(0, 1, 2 ** 12 + 1)
        f = SampledFunction1D(t, t)
        assert young_integral_1d(f, f) == pytest.approx(0.5, abs=1e-3)

    def test_constant_integrand_exact(self):
        t = np.linspace(0, 1, 50)
        f = SampledFunction1D(t, np.full(50, 2.5))
        g = SampledFunction1D(t, np.sin(t))
        assert young_integral_1d(f, g) == pytest.approx(2.5 * (np.sin(1.0) - 0.0), rel=1e-12)

    def test_polynomial_calculus_oracle(self):
        # int_0^1 s^2 d(s^3) = int 3 s^4 ds = 3/5
        t = np.linspace(0, 1, 2 ** 12 + 1)
        f = SampledFunction1D(t, t ** 2)
        g = SampledFunction1D(t, t ** 3)
        assert young_integral_1d(f, g) == pytest.approx(0.6, abs=1e-3)

    def test_dimension_mismatch_rejected(self):
        t = np.linspace(0, 1, 5)
        with pytest.raises(ValueError):
            young_integral_1d(SampledFunction1D(t, np.zeros((5, 2))),
                              SampledFunction1D(t, np.zeros(5)))

    def test_integration_by_parts(self):
        t = np.linspace(0, 1, 2 ** 11 + 1)
        f = SampledFunction1D(t, np.sin(2 * t))
        g = SampledFunction1D(t, np.cos(t))
        lhs = young_integral_1d(f, g) + young_integral_1d(g, f)
        rhs = np.sin(2.0) * np.cos(1.0) - 0.0
        assert lhs == pytest.approx(rhs, abs=1e-3)


class TestYoung2D:
    def test_constant_one_gives_increment(self):
        s = np.linspace(0, 1, 9)
        f = SampledFunction2D(s, s, np.ones((9, 9)))
        g = SampledFunction2D(s, s, np.add.outer(s, s) ** 2)
        rect = (0.25, 1.0, 0.5, 1.0)
        got = young_integral_2d(f, g, rect)
        gv = lambda a, b: (a + b) ** 2
        expected = gv(1, 1) - gv(0.25, 1) - gv(1, 0.5) + gv(0.25, 0.5)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_product_calculus_oracle(self):
        # f = g = s*u on [0,1]^2: sum f * ddg -> int int su ds du = 1/4
        s = np.linspace(0, 1, 2 ** 9 + 1)
        f = SampledFunction2D(s, s, np.outer(s, s))
        assert young_integral_2d(f, f) == pytest.approx(0.25, abs=1e-3)

    def test_degenerate_rect_zero(self):
        s = np.linspace(0, 1, 9)
        f = SampledFunction2D(s, s, np.outer(s, s))
        assert young_integral_2d(f, f, rect=(0.0, 1.0, 0.3, 0.3)) == 0.0
