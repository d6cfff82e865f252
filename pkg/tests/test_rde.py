import numpy as np
import pytest

from roughfilter.fields import make_drift, make_sigma, zero_drift
from roughfilter.lift import lift_segmentwise
from roughfilter.rde import (
    BlowUpError,
    ControlledSolution,
    VectorField,
    rough_integral,
    rough_integral_path,
    solve_jacobian,
    solve_rde,
    solve_rde_volterra,
)
from roughfilter.volterra import VolterraKernel, sample_joint


def linear_1d(scale=1.0):
    return VectorField(
        fn=lambda y: scale * y[..., None],
        jac=lambda y: np.full(y.shape[:-1] + (1, 1, 1), scale),
        hess=lambda y: np.zeros(y.shape[:-1] + (1, 1, 1, 1)),
        d_state=1, d_out=1, d_in=1, name="linear1d")


def zero_field(d=1, e=1):
    return VectorField(
        fn=lambda y: np.zeros(y.shape[:-1] + (d, e)),
        jac=lambda y: np.zeros(y.shape[:-1] + (d, e, d)),
        hess=lambda y: np.zeros(y.shape[:-1] + (d, e, d, d)),
        d_state=d, d_out=d, d_in=e, name="zero")


class TestVectorField:
    def test_fd_jacobian_matches_analytic(self):
        rng = np.random.default_rng(0)
        analytic = make_sigma("tanh", 2, 2, 2, scale=1.3)
        fd = VectorField(fn=analytic.fn, d_state=2, d_out=2, d_in=2)
        assert fd.uses_fd
        for _ in range(10):
            y = rng.standard_normal(2)
            gap = np.abs(fd.jacobian(y) - analytic.jacobian(y)).max()
            assert gap <= 1e-5 * (1 + np.abs(analytic.jacobian(y)).max())

    def test_fd_hessian_matches_analytic(self):
        rng = np.random.default_rng(1)
        analytic = make_sigma("sine", 1, 1, 1, scale=0.8)
        fd = VectorField(fn=analytic.fn, jac=analytic.jac, d_state=1, d_out=1, d_in=1)
        for _ in range(5):
            y = rng.standard_normal(1)
            gap = np.abs(fd.hessian(y) - analytic.hessian(y)).max()
            assert gap <= 1e-4


class TestRoughIntegral:
    def test_time_integral_exact(self):
        t = np.linspace(0, 1, 17)
        lift = lift_segmentwise(t, t, level=2)
        Z = ControlledSolution(grid=t, trace=t[:, None], gub1=np.ones((17, 1, 1)),
                               driver_ref=lift)
        assert rough_integral(Z, lift) == pytest.approx(0.5, abs=1e-15)

    def test_stratonovich_b_db_exact_any_mesh(self):
        rng = np.random.default_rng(2)
        t = np.linspace(0, 1, 33)
        b = np.r_[0.0, rng.standard_normal(32)].cumsum() * 0.3
        b -= b[0]
        lift = lift_segmentwise(t, b, level=2)
        Z = ControlledSolution(grid=t, trace=b[:, None], gub1=np.ones((33, 1, 1)),
                               driver_ref=lift)
        assert rough_integral(Z, lift) == pytest.approx(0.5 * b[-1] ** 2, abs=1e-10)

    def test_grid_mismatch_rejected(self):
        t = np.linspace(0, 1, 17)
        lift = lift_segmentwise(t, t, level=2)
        Z = ControlledSolution(grid=t[:9], trace=t[:9, None], gub1=np.ones((9, 1, 1)))
        with pytest.raises(ValueError):
            rough_integral(Z, lift)

    def test_cumulative_path_consistent(self):
        t = np.linspace(0, 1, 17)
        lift = lift_segmentwise(t, t ** 2, level=2)
        Z = ControlledSolution(grid=t, trace=(t ** 2)[:, None],
                               gub1=np.ones((17, 1, 1)), driver_ref=lift)
        path = rough_integral_path(Z, lift)
        assert path[0] == 0.0
        assert path[-1] == pytest.approx(rough_integral(Z, lift), abs=1e-14)


class TestSolveRDE:
    def test_zero_field_constant(self):
        t = np.linspace(0, 1, 33)
        lift = lift_segmentwise(t, np.sin(3 * t), level=2)
        sol = solve_rde(lift, zero_field(), np.array([2.0]))
        assert np.abs(sol.trace - 2.0).max() == 0.0

    def test_linear_field_exponential_second_order(self):
        errs = []
        for n in (5, 6, 7, 8):
            t = np.linspace(0, 1, 2 ** n + 1)
            x = np.sin(2 * t)
            lift = lift_segmentwise(t, x, level=2)
            sol = solve_rde(lift, linear_1d(), np.array([1.0]))
            errs.append(abs(sol.trace[-1, 0] - np.exp(x[-1] - x[0])))
        slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(slopes >= 1.8)

    def test_additive_noise_exact(self):
        rng = np.random.default_rng(3)
        t = np.linspace(0, 1, 65)
        path = rng.standard_normal((65, 2)).cumsum(axis=0) * 0.1
        path -= path[0]
        lift = lift_segmentwise(t, path, level=2)
        ident = VectorField(
            fn=lambda y: np.broadcast_to(np.eye(2), y.shape[:-1] + (2, 2)).copy(),
            jac=lambda y: np.zeros(y.shape[:-1] + (2, 2, 2)),
            hess=lambda y: np.zeros(y.shape[:-1] + (2, 2, 2, 2)),
            d_state=2, d_out=2, d_in=2)
        y0 = np.array([1.0, -1.0])
        sol = solve_rde(lift, ident, y0)
        np.testing.assert_allclose(sol.trace[-1], y0 + path[-1], atol=1e-13)

    def test_gub1_is_sigma_of_trace_exactly(self):
        k = VolterraKernel("mvn", H=0.4)
        (s,) = sample_joint(k, np.linspace(0, 1, 65), 1, 0, 1, seed=4)
        lift = lift_segmentwise(s.grid, s.B.T, level=2)
        sigma = make_sigma("tanh", 1, 1, 1, scale=0.9)
        sol = solve_rde(lift, sigma, np.array([0.3]))
        np.testing.assert_array_equal(sol.gub1, sigma.evaluate(sol.trace))

    def test_remainder_decay_order(self):
        # controlled-path remainder: log-log slope of |dZ - gub1 dX| vs mesh
        # at least 2/p - 0.15 on fBm drivers (pooled over paths)
        H, p = 0.4, 2.6
        k = VolterraKernel("mvn", H=H)
        samples = sample_joint(k, np.linspace(0, 1, 2 ** 9 + 1), 1, 0, 10, seed=5)
        sigma = make_sigma("tanh", 1, 1, 1, scale=0.8)
        widths = (2 ** 2, 2 ** 3, 2 ** 4, 2 ** 5, 2 ** 6)
        pooled = {w: [] for w in widths}
        for s in samples:
            lift = lift_segmentwise(s.grid, s.B.T, level=2)
            sol = solve_rde(lift, sigma, np.array([0.2]))
            tr, g1 = sol.trace[:, 0], sol.gub1[:, 0, 0]
            b = s.B[0]
            for width in widths:
                idx = np.arange(0, 2 ** 9 + 1, width)
                r = tr[idx[1:]] - tr[idx[:-1]] - g1[idx[:-1]] * (b[idx[1:]] - b[idx[:-1]])
                pooled[width].extend(r ** 2)
        rms = [np.sqrt(np.mean(pooled[w])) for w in widths]
        slope = np.polyfit(np.log([w / 2 ** 9 for w in widths]), np.log(rms), 1)[0]
        assert slope >= 2.0 / p - 0.15

    def test_blowup_reported_with_step(self):
        t = np.linspace(0, 1, 65)
        lift = lift_segmentwise(t, 5.0 * t, level=2)
        quad = VectorField(fn=lambda y: (y ** 2)[..., None],
                           jac=lambda y: 2.0 * y[..., None, None],
                           hess=lambda y: np.full(y.shape[:-1] + (1, 1, 1, 1), 2.0),
                           d_state=1, d_out=1, d_in=1)
        with pytest.raises(BlowUpError) as exc:
            solve_rde(lift, quad, np.array([3.0]), blowup=1e6)
        assert exc.value.step >= 1

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(6)
        t = np.linspace(0, 1, 33)
        x = np.sin(2 * t)
        lift = lift_segmentwise(t, x, level=2)
        y0 = rng.standard_normal((5, 1))
        batched = solve_rde(lift, linear_1d(), y0)
        for m in range(5):
            single = solve_rde(lift, linear_1d(), y0[m])
            np.testing.assert_array_equal(batched.trace[m], single.trace)


class TestSolveVolterra:
    def test_brownian_kernel_constant_drift(self):
        kb = VolterraKernel("brownian")
        t = np.linspace(0, 1, 65)
        lift = lift_segmentwise(t, np.zeros((65, 1)), level=2)
        sol = solve_rde_volterra(lift, zero_field(), make_drift("constant", 1, 1, scale=0.7),
                                 kb, np.array([0.5]))
        assert abs(sol.trace[-1, 0] - 1.2) <= 1e-10

    def test_rl_drift_equals_kernel_integral(self):
        krl = VolterraKernel("rl", H=0.4)
        t = np.linspace(0, 1, 65)
        lift = lift_segmentwise(t, np.zeros((65, 1)), level=2)
        sol = solve_rde_volterra(lift, zero_field(), make_drift("constant", 1, 1, scale=1.0),
                                 krl, np.array([0.0]))
        assert sol.trace[-1, 0] == pytest.approx(krl.cross_covariance(1.0, 0.0, 1.0), abs=1e-8)

    def test_flow_property_with_history(self):
        km = VolterraKernel("mvn", H=0.4)
        (s,) = sample_joint(km, np.linspace(0, 1, 65), 1, 0, 1, seed=7)
        lift = lift_segmentwise(s.grid, s.B.T, level=2)
        sigma = make_sigma("linear", 1, 1, 1, scale=0.5)
        b = make_drift("tanh", 1, 1, scale=0.8)
        full = solve_rde_volterra(lift, sigma, b, km, np.array([1.0]))
        resumed = solve_rde_volterra(lift, sigma, b, km, np.array([1.0]),
                                     prefix_states=full.trace[:33], start_index=32)
        assert np.abs(resumed.trace[-1] - full.trace[-1]).max() <= 1e-9

    def test_brownian_reduction_to_time_drift(self):
        kb = VolterraKernel("brownian")
        km = None
        rng = np.random.default_rng(8)
        t = np.linspace(0, 1, 65)
        path = np.r_[0.0, rng.standard_normal(64)].cumsum() * 0.2
        path -= path[0]
        lift = lift_segmentwise(t, path, level=2)
        sigma = make_sigma("linear", 1, 1, 1, scale=0.5)
        b = make_drift("sine", 1, 1, scale=0.6)
        sol = solve_rde_volterra(lift, sigma, b, kb, np.array([1.0]))
        # manual stepping with int b(Z_s) ds as the drift (identity-kernel form)
        y = 1.0
        for k in range(64):
            sig = 0.5 * y
            g2 = 0.5 * sig
            y = (y + sig * lift.lvl1[k, 0] + g2 * lift.lvl2[k, 0, 0]
                 + 0.6 * np.sin(y) * (t[k + 1] - t[k]))
        assert abs(sol.trace[-1, 0] - y) <= 1e-9

    def test_picard_iterations_contract(self):
        km = VolterraKernel("mvn", H=0.4)
        (s,) = sample_joint(km, np.linspace(0, 1, 2 ** 7 + 1), 1, 0, 1, seed=9)
        sigma = make_sigma("linear", 1, 1, 1, scale=0.5)
        b = make_drift("tanh", 1, 1, scale=0.8)
        diffs = []
        for n in (5, 6, 7):
            step = 2 ** (7 - n)
            lift = lift_segmentwise(s.grid[::step], s.B[0, ::step], level=2)
            s0 = solve_rde_volterra(lift, sigma, b, km, np.array([1.0]), picard_iters=0)
            s2 = solve_rde_volterra(lift, sigma, b, km, np.array([1.0]), picard_iters=2)
            diffs.append(np.abs(s0.trace[-1] - s2.trace[-1]).max())
        assert diffs[0] / diffs[1] >= 1.5 and diffs[1] / diffs[2] >= 1.5


class TestJacobian:
    def test_constant_sigma_identity(self):
        t = np.linspace(0, 1, 33)
        lift = lift_segmentwise(t, np.sin(t), level=2)
        sigma = make_sigma("constant", 1, 1, 1, scale=2.0)
        Z = solve_rde(lift, sigma, np.array([0.0]))
        J = solve_jacobian(lift, sigma, Z)
        assert np.abs(J.trace - 1.0).max() <= 1e-14

    def test_linear_sigma_exponential(self):
        errs = []
        for n in (6, 7, 8):
            t = np.linspace(0, 1, 2 ** n + 1)
            x = np.sin(2 * t)
            lift = lift_segmentwise(t, x, level=2)
            Z = solve_rde(lift, linear_1d(), np.array([1.0]))
            J = solve_jacobian(lift, linear_1d(), Z)
            errs.append(abs(J.trace[-1, 0] - np.exp(x[-1] - x[0])))
        slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(slopes >= 1.8)

    def test_determinant_positive_on_fbm(self):
        km = VolterraKernel("mvn", H=0.4)
        samples = sample_joint(km, np.linspace(0, 1, 65), 2, 0, 20, seed=10)
        sigma = make_sigma("tanh", 2, 2, 2, scale=0.8)
        for s in samples:
            lift = lift_segmentwise(s.grid, s.B.T, level=2)
            Z = solve_rde(lift, sigma, np.array([0.1, -0.2]))
            J = solve_jacobian(lift, sigma, Z)
            mats = J.trace.reshape(-1, 2, 2)
            assert np.all(np.linalg.det(mats) > 0)
