"""Condensed in-process property suite for the CLI selftest command.

Each check is quick (seconds) and covers one module's core invariants;
the heavyweight statistical validation lives in the pytest suite.
"""

import numpy as np

from .fields import make_drift, make_sigma
from .filtering import Phi, Scenario, normalized_filter, simulate_truth, weight_ensemble
from .kalman import kalman_bucy_path
from .lift import chen_residual, lift_joint_hybrid, lift_segmentwise
from .rde import solve_rde
from .tensor import exp_segment, grouplike_residual, tensor_mul
from .variation import SampledFunction1D, p_variation, young_integral_1d
from .volterra import VolterraKernel, sample_joint, sample_joint_arrays
from .zakai import default_x_grid, solve_zakai, zakai_mass


def _algebra(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        g = exp_segment(rng.standard_normal(3))
        h = exp_segment(rng.standard_normal(3))
        worst = max(worst, grouplike_residual(tensor_mul(g, h)))
    return worst <= 1e-12, f"max group-like residual {worst:.2e}"


def _variation(seed):
    t = np.linspace(0, 1, 2 ** 10 + 1)
    val = young_integral_1d(SampledFunction1D(t, t ** 2),
                            SampledFunction1D(t, t ** 3))
    ok1 = abs(val - 0.6) < 1e-3
    f = SampledFunction1D(np.linspace(0, 1, 12), np.linspace(0, 3, 12))
    ok2 = abs(p_variation(f, 1.0) - 3.0) < 1e-12
    return ok1 and ok2, f"young {val:.5f} (expect 0.6)"


def _sampling(seed):
    k = VolterraKernel("mvn", H=0.4)
    grid = np.linspace(0, 1, 65)
    _, B, _ = sample_joint_arrays(k, grid, 1, 0, 3000, seed)
    var = B[:, 0, -1].var(ddof=1)
    se = var * np.sqrt(2.0 / 2999)
    return abs(var - 1.0) <= 4 * se, f"Var(B_1) = {var:.4f}"


def _lift(seed):
    k = VolterraKernel("mvn", H=0.4)
    (smp,) = sample_joint(k, np.linspace(0, 1, 129), 1, 1, 1, seed)
    lift = lift_joint_hybrid(smp, [0], level=3, inner_refine=8)
    worst = max(grouplike_residual(lift.increment(i)) for i in range(lift.n_intervals))
    cr = chen_residual(lift)
    return worst <= 1e-11 and cr <= 1e-11, f"residuals {worst:.1e}/{cr:.1e}"


def _rde(seed):
    from .rde import VectorField

    lin = VectorField(fn=lambda y: y[..., None],
                      jac=lambda y: np.ones(y.shape[:-1] + (1, 1, 1)),
                      hess=lambda y: np.zeros(y.shape[:-1] + (1, 1, 1, 1)),
                      d_state=1, d_out=1, d_in=1)
    t = np.linspace(0, 1, 257)
    x = np.sin(2 * t)
    sol = solve_rde(lift_segmentwise(t, x, level=2), lin, np.array([1.0]))
    err = abs(sol.trace[-1, 0] - np.exp(x[-1] - x[0]))
    return err < 1e-4, f"linear RDE endpoint error {err:.2e}"


def _girsanov(seed):
    s = Scenario(kernel=VolterraKernel("mvn", H=0.4),
                 sigma=make_sigma("constant", 1, 1, 2, scale=0.6),
                 b=make_drift("tanh", 1, 2, d_x=1, scale=0.8),
                 x0_law=("gaussian", 0.5, 0.5), T=1.0, grid_n=32, inner_refine=4)
    ens = weight_ensemble(s, 2000, seed)
    lam = ens["lambda_T"]
    w = np.exp(ens["xi_T"])
    ok = abs(lam.mean() - 1) <= 4 * lam.std() / np.sqrt(len(lam)) \
        and abs(w.mean() - 1) <= 4 * w.std() / np.sqrt(len(w))
    return ok, f"E[Lam]={lam.mean():.4f} E[expXi]={w.mean():.4f}"


def _filter_prior(seed):
    # b = 0: the normalized filter reproduces the prior mean
    s = Scenario(kernel=VolterraKernel("mvn", H=0.4),
                 sigma=make_sigma("constant", 1, 1, 2, scale=0.5),
                 b=make_drift("constant", 1, 2, scale=0.0),
                 x0_law=("gaussian", 0.4, 0.3), T=1.0, grid_n=32,
                 inner_refine=4, phi=Phi("coordinate", 0))
    truth = simulate_truth(s, seed)
    est = normalized_filter(s, truth, 2000, seed + 1, [1.0])[0]
    gap = abs(est.value - 0.4)
    tol = 3 * max(est.stderr, 0.5 / np.sqrt(2000))
    return gap <= tol, f"prior mean gap {gap:.4f} (tol {tol:.4f})"


def _filter_kalman(seed):
    s = Scenario(kernel=VolterraKernel("brownian"),
                 sigma=make_sigma("constant", 1, 1, 2, scale=0.6),
                 b=make_drift("linear", 1, 2, d_x=1, scale=0.8),
                 x0_law=("gaussian", 1.0, 0.5), T=1.0, grid_n=64,
                 inner_refine=8, phi=Phi("coordinate", 0))
    truth = simulate_truth(s, seed)
    est = normalized_filter(s, truth, 4000, seed + 1, [1.0])[0]
    mkb, _ = kalman_bucy_path(truth.grid, truth.Y_fine[0, ::8], 0.6, 0.8, 1.0,
                              0.25, substeps=8)
    rel = abs(est.value - mkb[-1]) / max(abs(mkb[-1]), 0.2)
    return rel < 0.08, f"KB relative gap {rel:.4f}"


def _zakai(seed):
    s = Scenario(kernel=VolterraKernel("brownian"),
                 sigma=make_sigma("constant", 1, 1, 2, scale=0.7),
                 b=make_drift("constant", 1, 2, scale=0.0),
                 x0_law=("gaussian", 0.0, 0.3), T=1.0, grid_n=64, inner_refine=4)
    truth = simulate_truth(s, seed)
    zg = solve_zakai(s, truth, default_x_grid(s, 257), kappa=0.5)
    mass_gap = max(abs(zakai_mass(zg, t) - 1.0) for t in zg.t_grid)
    x = zg.x_grid
    rho = zg.slice_at(1.0)
    m0 = np.trapezoid(rho, x)
    var = np.trapezoid(x * x * rho, x) / m0 - (np.trapezoid(x * rho, x) / m0) ** 2
    rel = abs(var - (0.09 + 0.49)) / (0.09 + 0.49)
    return mass_gap <= 1e-6 and rel < 0.02, \
        f"mass gap {mass_gap:.1e}, variance rel err {rel:.4f}"


CHECKS = [
    ("tensor_algebra", _algebra),
    ("variation_analysis", _variation),
    ("volterra_sampling", _sampling),
    ("rough_lift", _lift),
    ("rde_engine", _rde),
    ("girsanov_weights", _girsanov),
    ("filter_prior_consistency", _filter_prior),
    ("filter_kalman_bucy", _filter_kalman),
    ("zakai_heat_kernel", _zakai),
]


def run_all(seed: int = 1):
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # noqa: BLE001 - report, do not crash the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
    return results
