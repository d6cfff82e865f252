import numpy as np
import pytest

from roughfilter.fields import make_drift, make_sigma
from roughfilter.filtering import Phi, Scenario, robust_filter, simulate_truth
from roughfilter.kalman import kalman_bucy_path
from roughfilter.volterra import VolterraKernel
from roughfilter.zakai import (
    apply_a_star,
    calibrate_kappa,
    compare_zakai_particle,
    default_x_grid,
    rough_viscosity_convergence,
    solve_zakai,
    zakai_mass,
)

from oracles import kalman_bucy


def heat_scenario(sigma=0.7, grid_n=64, inner=4):
    return Scenario(kernel=VolterraKernel("brownian"),
                    sigma=make_sigma("constant", 1, 1, 2, scale=sigma),
                    b=make_drift("constant", 1, 2, scale=0.0),
                    x0_law=("gaussian", 0.0, 0.3),
                    T=1.0, grid_n=grid_n, inner_refine=inner)


def lg_scenario(sigma=0.6, beta=0.8, grid_n=64, inner=8, H=0.5):
    kernel = VolterraKernel("brownian") if H == 0.5 else VolterraKernel("mvn", H=H)
    return Scenario(kernel=kernel,
                    sigma=make_sigma("constant", 1, 1, 2, scale=sigma),
                    b=make_drift("linear", 1, 2, d_x=1, scale=beta),
                    x0_law=("gaussian", 1.0, 0.5),
                    T=1.0, grid_n=grid_n, inner_refine=inner)


def moments(x, rho):
    mass = np.trapezoid(rho, x)
    mean = np.trapezoid(x * rho, x) / mass
    var = np.trapezoid(x * x * rho, x) / mass - mean ** 2
    return mass, mean, var


class TestApplyAStar:
    def test_constant_sigma_is_scaled_laplacian(self):
        x = np.linspace(-5, 5, 201)
        rho = np.exp(-x * x)
        out = apply_a_star(rho, lambda v: np.full_like(v, 1.7), x)
        dx = x[1] - x[0]
        lap = np.zeros_like(rho)
        lap[1:-1] = (rho[2:] - 2 * rho[1:-1] + rho[:-2]) / dx ** 2
        lap[0] = (rho[1] - 2 * rho[0]) / dx ** 2
        lap[-1] = (rho[-2] - 2 * rho[-1]) / dx ** 2
        np.testing.assert_allclose(out, 1.7 ** 2 * lap, atol=1e-9)

    def test_zero_density(self):
        x = np.linspace(-1, 1, 33)
        assert np.all(apply_a_star(np.zeros(33), lambda v: v, x) == 0.0)

    def test_linear_sigma_second_order_against_symbolic(self):
        import sympy as sp

        xs = sp.symbols("x")
        expr = sp.diff(sp.exp(-xs ** 2 / 2) * xs * xs, xs, 2) \
            - sp.diff(sp.exp(-xs ** 2 / 2) * 1 * xs, xs)
        f = sp.lambdify(xs, expr)
        errs = []
        for m in (65, 129, 257):
            x = np.linspace(-6, 6, m)
            out = apply_a_star(np.exp(-x ** 2 / 2), lambda v: v, x,
                               dsigma_vals=lambda v: np.ones_like(v))
            sl = slice(2, m - 2)
            errs.append(np.abs(out[sl] - f(x[sl])).max())
        slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(slopes >= 1.8)

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            apply_a_star(np.zeros(4), lambda v: v, np.linspace(0, 1, 4))


class TestSolveZakai:
    def test_heat_kernel_variance_growth(self):
        s = heat_scenario()
        truth = simulate_truth(s, seed=1)
        x = default_x_grid(s, 257)
        zg = solve_zakai(s, truth, x, kappa=0.5)
        _, _, var = moments(x, zg.slice_at(1.0))
        expected = 0.3 ** 2 + 0.7 ** 2 * 1.0
        assert abs(var - expected) / expected < 0.02

    def test_mass_conserved_without_reaction(self):
        s = heat_scenario()
        truth = simulate_truth(s, seed=2)
        x = default_x_grid(s, 257)
        zg = solve_zakai(s, truth, x, kappa=0.5)
        masses = np.array([zakai_mass(zg, t) for t in zg.t_grid])
        assert np.abs(masses - 1.0).max() <= 1e-6

    def test_positivity(self):
        s = lg_scenario()
        truth = simulate_truth(s, seed=3)
        x = default_x_grid(s, 257)
        zg = solve_zakai(s, truth, x, kappa=0.5)
        assert zg.rho.min() >= -1e-8 * zg.rho.max()

    def test_posterior_mean_vs_kalman_bucy(self):
        s = lg_scenario()
        errs = []
        for i in range(10):
            truth = simulate_truth(s, seed=10 + i)
            x = default_x_grid(s, 257)
            zg = solve_zakai(s, truth, x, kappa=0.5)
            _, mean, _ = moments(x, zg.slice_at(1.0))
            mkb, _ = kalman_bucy(truth.grid, truth.Y_fine[0, ::s.inner_refine],
                                 0.6, 0.8, 1.0, 0.25)
            errs.append(abs(mean - mkb[-1]) / max(abs(mkb[-1]), 0.2))
        assert np.mean(errs) < 0.05

    def test_mass_matches_g1_estimate(self):
        s = lg_scenario(grid_n=64, inner=8)
        truth = simulate_truth(s, seed=21)
        x = default_x_grid(s, 257)
        zg = solve_zakai(s, truth, x, kappa=0.5)
        s1 = Scenario(kernel=s.kernel, sigma=s.sigma, b=s.b, x0_law=s.x0_law,
                      T=s.T, grid_n=s.grid_n, inner_refine=s.inner_refine,
                      phi=Phi("one"))
        est = robust_filter(s1, truth, n_mc=4000, seed=5, t_eval=[1.0])[0]
        band = 3 * est.stderr + 0.05 * est.value
        assert abs(zakai_mass(zg, 1.0) - est.value) <= band

    def test_non_monotone_r_rejected(self):
        s = heat_scenario()
        truth = simulate_truth(s, seed=6)

        class DecayingKernel:
            H = 0.5

            @staticmethod
            def covariance(a, b):
                return -np.minimum(a, b)

        bad = Scenario(kernel=DecayingKernel(), sigma=s.sigma, b=s.b,
                       x0_law=s.x0_law, T=s.T, grid_n=s.grid_n,
                       inner_refine=s.inner_refine)
        with pytest.raises(ValueError):
            solve_zakai(bad, truth, np.linspace(-3, 3, 65), 0.5)

    def test_1d_only(self):
        s2 = Scenario(kernel=VolterraKernel("brownian"), d_B=2, d_Y=1, d_X=2,
                      sigma=make_sigma("constant", 2, 2, 3, scale=0.5),
                      b=make_drift("constant", 1, 3, d_x=2, scale=0.0),
                      x0_law=("point", 0.0), T=1.0, grid_n=8, inner_refine=2)
        truth = simulate_truth(s2, seed=7)
        with pytest.raises(ValueError):
            solve_zakai(s2, truth, np.linspace(-1, 1, 65), 0.5)


class TestKappaCalibration:
    def test_half_wins_and_stable_across_draws(self):
        s = lg_scenario(grid_n=64, inner=4)
        kappa, table = calibrate_kappa(s, n_draws=5, seed=30)
        assert kappa == 0.5
        assert all(r["winner"] == 0.5 for r in table)

    def test_rejects_wrong_hurst(self):
        s = lg_scenario(H=0.4, grid_n=16, inner=2)
        with pytest.raises(ValueError):
            calibrate_kappa(s, n_draws=1, seed=0)


class TestViscosityConvergence:
    def test_smooth_driver_first_order(self):
        # deterministic smooth observation: distances decay at first order
        s = heat_scenario(grid_n=32, inner=8)
        truth = simulate_truth(s, seed=8)
        smooth = type(truth)(
            grid_fine=truth.grid_fine, inner_refine=truth.inner_refine,
            X=truth.X, Y_fine=np.sin(2 * truth.grid_fine)[None, :],
            W_fine=np.sin(2 * truth.grid_fine)[None, :],
            B_fine=truth.B_fine, lambda_path=truth.lambda_path,
            measure=truth.measure)
        sb = Scenario(kernel=s.kernel, sigma=s.sigma,
                      b=make_drift("linear", 1, 2, d_x=1, scale=0.5),
                      x0_law=("gaussian", 0.0, 0.3), T=1.0, grid_n=32,
                      inner_refine=8)
        rows = rough_viscosity_convergence(sb, smooth, default_x_grid(sb, 129),
                                           0.5, refine_levels=3)
        d = [r[2] for r in rows]
        assert d[0] / d[1] > 1.5 and d[1] / d[2] > 1.5

    @pytest.mark.parametrize("H", [0.5, 0.4])
    def test_stochastic_driver_distances_decrease(self, H):
        s = lg_scenario(H=H, grid_n=32, inner=8)
        dists = np.zeros(3)
        for i in range(3):
            truth = simulate_truth(s, seed=40 + i)
            rows = rough_viscosity_convergence(s, truth, default_x_grid(s, 129),
                                               0.5, refine_levels=3)
            dists += np.array([r[2] for r in rows])
        assert dists[0] > dists[1] > dists[2]


class TestZakaiParticle:
    def test_b_zero_heat_agreement(self):
        s = heat_scenario(grid_n=64, inner=4)
        truth = simulate_truth(s, seed=9)
        out = compare_zakai_particle(s, truth, 10_000, default_x_grid(s, 257),
                                     0.5, seed=10, t_eval=[1.0])
        assert out["l1_distance"] <= 0.05

    def test_t0_kde_smoothing_only(self):
        s = heat_scenario(grid_n=32, inner=4)
        truth = simulate_truth(s, seed=11)
        out = compare_zakai_particle(s, truth, 10_000, default_x_grid(s, 257),
                                     0.5, seed=12, t_eval=[0.0])
        assert out["l1_distance"] <= 0.05

    def test_linear_gaussian_joint_target(self):
        s = lg_scenario(grid_n=64, inner=8)
        truth = simulate_truth(s, seed=13)
        out = compare_zakai_particle(s, truth, 10_000, default_x_grid(s, 257),
                                     0.5, seed=14, t_eval=[1.0])
        assert out["l1_distance"] <= 0.1
