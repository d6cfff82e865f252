"""Girsanov weights, the decoupled Monte-Carlo robust filter, trapezoid
conversion checks, and weighted density estimation.

The truth simulator realizes the signal-observation system on the scenario
grid (driving noise sampled on a finer internal grid so the Ito cross
integrals of the observation pair can be formed).  The robust filter draws
fresh copies of the signal noise, lifts (fresh B, observed Y, observed W)
jointly, solves the reference dynamics for the signal copy, and averages
phi(X) exp(Xi) with the rough weight Xi.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .fields import make_drift, make_sigma
from .lift import LiftBatch, default_p_level, hybrid_lift_batch, sub_lift
from .rde import (
    ControlledSolution,
    VectorField,
    compose_observation_functional,
    rough_integral,
    rough_integral_path,
    solve_rde,
    solve_rde_volterra,
)
from .variation import SampledFunction1D, young_integral_1d
from .volterra import (VolterraKernel, panel_weights_cached, path_rng,
                       sample_joint_arrays)

__all__ = [
    "Phi",
    "Scenario",
    "FilterEstimate",
    "TruthRecord",
    "simulate_truth",
    "xi_rough",
    "robust_filter",
    "normalized_filter",
    "trapezoid_check",
    "TrapezoidReport",
    "density_kde",
    "shift_observation",
    "DegenerateWeightsError",
    "estimates_to_csv",
]

_X0_SEED_STREAM = 2 ** 32 + 1   # component-key offsets for auxiliary draws
_FRESH_SEED_STREAM = 2 ** 32 + 7


class DegenerateWeightsError(RuntimeError):
    pass


@dataclass(frozen=True)
class Phi:
    """Test function on the signal: coordinate, threshold indicator,
    polynomial in x_1, or a bounded smooth bump (tanh)."""

    kind: str = "coordinate"
    index: int = 0
    threshold: float = 0.0
    coeffs: tuple = (0.0, 1.0)

    def __call__(self, x):
        x = np.asarray(x)
        if self.kind == "one":
            return np.ones(x.shape[:-1])
        if self.kind == "coordinate":
            return x[..., self.index]
        if self.kind == "indicator_above":
            return (x[..., self.index] > self.threshold).astype(float)
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(x[..., self.index],
                                                    np.asarray(self.coeffs))
        if self.kind == "bounded_smooth":
            return np.tanh(x[..., self.index])
        raise ValueError(f"unknown phi kind {self.kind!r}")


@dataclass(frozen=True)
class Scenario:
    """Signal-observation scenario: kernel, dimensions, fields, initial law,
    horizon, grid resolution, and the default test function."""

    kernel: VolterraKernel
    d_B: int = 1
    d_Y: int = 1
    d_X: int = 1
    sigma: VectorField = None
    b: VectorField = None
    x0_law: tuple = ("point", 0.0)
    T: float = 1.0
    grid_n: int = 128
    inner_refine: int = 8
    phi: Phi = field(default_factory=Phi)

    def __post_init__(self):
        if self.sigma is None:
            object.__setattr__(self, "sigma",
                               make_sigma("constant", self.d_X, self.d_B,
                                          self.d_state, scale=1.0))
        if self.b is None:
            object.__setattr__(self, "b",
                               make_drift("constant", self.d_Y, self.d_state,
                                          d_x=self.d_X, scale=0.0))
        if self.sigma.d_out != self.d_X or self.sigma.d_in != self.d_B:
            raise ValueError("sigma block shape mismatch")
        if self.b.d_out != self.d_Y:
            raise ValueError("observation drift dimension mismatch")
        if self.T <= 0:
            raise ValueError("horizon must be positive")

    @property
    def d_state(self) -> int:
        return self.d_X + self.d_Y

    @property
    def d_noise(self) -> int:
        return self.d_B + self.d_Y

    @property
    def p_level(self):
        return default_p_level(self.kernel.H)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.grid_n + 1)

    @property
    def fine_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.grid_n * self.inner_refine + 1)

    def sigma_hat(self) -> VectorField:
        """Block field diag(sigma(x, y), identity) driving (X, Y)."""
        dx, dy, db = self.d_X, self.d_Y, self.d_B
        ds, e = self.d_state, self.d_noise
        sig = self.sigma

        def fn(z):
            out = np.zeros(z.shape[:-1] + (ds, e))
            out[..., :dx, :db] = sig.evaluate(z)
            for j in range(dy):
                out[..., dx + j, db + j] = 1.0
            return out

        def jac(z):
            out = np.zeros(z.shape[:-1] + (ds, e, ds))
            out[..., :dx, :db, :] = sig.jacobian(z)
            return out

        def hess(z):
            out = np.zeros(z.shape[:-1] + (ds, e, ds, ds))
            out[..., :dx, :db, :, :] = sig.hessian(z)
            return out

        return VectorField(fn=fn, jac=jac, hess=hess, d_state=ds, d_out=ds,
                           d_in=e, name="sigma_hat")

    def b_hat(self) -> VectorField:
        """Zero-padded drift (0_{d_X}, b(x, y)) on the full state."""
        dx, ds = self.d_X, self.d_state
        b = self.b

        def fn(z):
            out = np.zeros(z.shape[:-1] + (ds, 1))
            out[..., dx:, :] = b.evaluate(z)
            return out

        def jac(z):
            out = np.zeros(z.shape[:-1] + (ds, 1, ds))
            out[..., dx:, :, :] = b.jacobian(z)
            return out

        def hess(z):
            out = np.zeros(z.shape[:-1] + (ds, 1, ds, ds))
            out[..., dx:, :, :, :] = b.hessian(z)
            return out

        return VectorField(fn=fn, jac=jac, hess=hess, d_state=ds, d_out=ds,
                           d_in=1, name="b_hat")

    def sample_x0(self, seed: int, n: int) -> np.ndarray:
        kind = self.x0_law[0]
        if kind == "point":
            v = np.broadcast_to(np.atleast_1d(np.asarray(self.x0_law[1], dtype=float)),
                                (self.d_X,))
            return np.tile(v, (n, 1))
        if kind == "gaussian":
            mean, sd = float(self.x0_law[1]), float(self.x0_law[2])
            z = path_rng(seed, _X0_SEED_STREAM).standard_normal((n, self.d_X))
            return mean + sd * z
        raise ValueError(f"unknown x0 law {kind!r}")


@dataclass(frozen=True)
class FilterEstimate:
    t: float
    value: float
    stderr: float
    n_samples: int
    kind: str  # "unnormalized" | "normalized"
    ess: float = float("nan")
    n_failed: int = 0


@dataclass(frozen=True)
class TruthRecord:
    """One realization of the system plus everything the filter consumes."""

    grid_fine: np.ndarray
    inner_refine: int
    X: np.ndarray        # (n_coarse+1, d_X) signal on the scenario grid
    Y_fine: np.ndarray   # (d_Y, n_fine+1)
    W_fine: np.ndarray   # (d_Y, n_fine+1) P-Brownian motion associated to Y
    B_fine: np.ndarray   # (d_B + d_Y, n_fine+1) driving Volterra block
    lambda_path: np.ndarray  # Girsanov density on the scenario grid
    measure: str

    @property
    def grid(self) -> np.ndarray:
        return self.grid_fine[:: self.inner_refine]


def _lift_level(s: Scenario) -> int:
    return s.p_level[1]


def simulate_truth(s: Scenario, seed: int, under: str = "P_b") -> TruthRecord:
    """Sample the system on the scenario grid.

    under="P_b": coupled dynamics with the Volterra observation drift; the
    returned W is the P-Brownian motion associated with Y (drift-shifted).
    under="P": reference dynamics (no drift); then W is the sampled driver
    and Lambda is an exponential martingale with mean one.
    """
    if under not in ("P_b", "P"):
        raise ValueError("measure must be 'P_b' or 'P'")
    fine = s.fine_grid
    r = s.inner_refine
    d_tot = s.d_noise
    W_all, B_all, _ = sample_joint_arrays(s.kernel, fine, d_tot, d_tot, 1, seed)
    W_obs = W_all[0, s.d_B:]          # (d_Y, n_fine)
    B_blk = B_all[0]                  # (d_tot, n_fine)
    grid = fine[::r]
    level = _lift_level(s)
    lift = hybrid_lift_batch(fine, B_blk[None], (), level=level,
                             inner_refine=r).path(0)
    x0 = s.sample_x0(seed, 1)[0]
    z0 = np.concatenate([x0, np.zeros(s.d_Y)])
    sig_hat = s.sigma_hat()
    if under == "P_b":
        sol = solve_rde_volterra(lift, sig_hat, s.b_hat(), s.kernel, z0,
                                 panel_weights=panel_weights_cached(s.kernel, grid))
    else:
        sol = solve_rde(lift, sig_hat, z0)
    Z = sol.trace                      # (n_coarse+1, d_state)
    bvals = s.b.evaluate(Z)[..., 0]    # (n_coarse+1, d_Y)
    if under == "P_b":
        # Y = K b(Z) + B_obs evaluated on the fine grid with left-point b;
        # the associated P-Brownian motion gains the drift integral
        pw_fine = panel_weights_cached(s.kernel, fine)
        bstep = np.repeat(bvals[:-1], r, axis=0)   # (n_fine-1, d_Y)
        Y_fine = B_blk[s.d_B:] + (pw_fine[:, : bstep.shape[0]] @ bstep).T
        dt_fine = np.diff(fine)
        drift_int = np.concatenate([
            np.zeros((1, s.d_Y)), np.cumsum(bstep * dt_fine[:, None], axis=0)], axis=0)
        W_fine = W_obs + drift_int.T
    else:
        Y_fine = B_blk[s.d_B:]
        W_fine = W_obs
    # Ito Girsanov weight via left-point sums on the scenario grid
    dW = np.diff(W_fine[:, ::r], axis=1)           # (d_Y, n_coarse)
    dt = np.diff(grid)
    incr = np.sum(bvals[:-1].T * dW, axis=0) - 0.5 * np.sum(
        bvals[:-1].T ** 2 * dt[None, :], axis=0)
    lam = np.exp(np.concatenate([[0.0], np.cumsum(incr)]))
    return TruthRecord(grid_fine=fine, inner_refine=r, X=Z[:, : s.d_X],
                       Y_fine=Y_fine, W_fine=W_fine, B_fine=B_blk,
                       lambda_path=lam, measure=under)


def _full_paths(s: Scenario, B_block, observed) -> np.ndarray:
    """(M, d_B + 2 d_Y, n_fine) concatenation [B-block, Y, W]."""
    M = B_block.shape[0]
    Y = np.broadcast_to(observed.Y_fine, (M,) + observed.Y_fine.shape)
    W = np.broadcast_to(observed.W_fine, (M,) + observed.W_fine.shape)
    return np.concatenate([B_block, Y, W], axis=1)


def _cross_pairs(s: Scenario):
    return tuple((s.d_B + j, s.d_B + s.d_Y + j) for j in range(s.d_Y))


def hybrid_and_solution(s: Scenario, B_block, observed, x0):
    """Joint hybrid lift of (B-block, Y, W) plus the reference-dynamics
    solution X driven by the geometric (B, Y) sub-lift (batched)."""
    level = _lift_level(s)
    paths = _full_paths(s, B_block, observed)
    lifts = hybrid_lift_batch(observed.grid_fine, paths, _cross_pairs(s),
                              level=level, inner_refine=observed.inner_refine)
    state_driver = sub_lift(lifts, list(range(s.d_noise)))
    z0 = np.concatenate([x0, np.zeros((x0.shape[0], s.d_Y))], axis=1)
    sol = solve_rde(state_driver, s.sigma_hat(), z0, blowup=np.inf)
    return lifts, sol


def xi_rough(s: Scenario, hybrid_lift, Z: ControlledSolution) -> np.ndarray:
    """Rough weight path Xi_t: the compensated-sum integral of the
    zero-padded drift against the full hybrid lift (active on the W block)
    minus half the trapezoid time integral of |b|^2."""
    e_full = s.d_B + 2 * s.d_Y
    if hybrid_lift.lvl1.shape[-1] != e_full:
        raise ValueError("hybrid lift is missing the W block")
    w_cols = [s.d_B + s.d_Y + j for j in range(s.d_Y)]
    state_cols = list(range(s.d_noise))
    integrand = compose_observation_functional(s.b, Z, e_full, w_cols,
                                               state_cols=state_cols)
    rough = rough_integral_path(integrand, hybrid_lift)
    trace = Z.trace if Z.trace.ndim == 3 else Z.trace[None]
    bsq = np.sum(s.b.evaluate(trace)[..., 0] ** 2, axis=-1)  # (M, n)
    dt = np.diff(hybrid_lift.grid)
    riemann = 0.5 * (bsq[:, :-1] + bsq[:, 1:]) * dt[None, :]
    riemann = np.concatenate([np.zeros((bsq.shape[0], 1)),
                              np.cumsum(riemann, axis=1)], axis=1)
    out = rough if rough.ndim == 2 else rough[None]
    out = out - 0.5 * riemann
    return out[0] if Z.trace.ndim == 2 else out


def _weighted_stats(vals, logw, kind, t, n_failed):
    ok = np.isfinite(vals) & np.isfinite(logw)
    n = int(ok.sum())
    if n == 0:
        raise DegenerateWeightsError("no usable samples")
    shift = np.max(logw[ok])
    w = np.exp(logw[ok] - shift)
    prods = vals[ok] * w
    mean = float(np.mean(prods) * np.exp(shift))
    stderr = float(np.std(prods, ddof=1) / np.sqrt(n) * np.exp(shift))
    ess = float(w.sum() ** 2 / np.sum(w * w))
    return FilterEstimate(t=float(t), value=mean, stderr=stderr, n_samples=n,
                          kind=kind, ess=ess, n_failed=n_failed)


def decoupled_samples(s: Scenario, observed, n_mc: int, seed: int):
    """Fresh-signal Monte-Carlo sweep against one observed pair: returns
    (grid, X paths (M, n, d_X), xi paths (M, n), n_failed) with failed
    samples masked to NaN."""
    fine = observed.grid_fine
    _, B_fresh, _ = sample_joint_arrays(s.kernel, fine, s.d_B, 0, n_mc,
                                        seed + _FRESH_SEED_STREAM)
    x0 = s.sample_x0(seed, n_mc)
    lifts, sol = hybrid_and_solution(s, B_fresh, observed, x0)
    grid = lifts.grid
    failed = ~np.isfinite(sol.trace[:, -1]).all(axis=-1) \
        | (np.nanmax(np.abs(sol.trace), axis=(1, 2)) > 1e8)
    n_failed = int(failed.sum())
    if n_failed > 0.01 * n_mc:
        raise RuntimeError(f"{n_failed} of {n_mc} samples failed to solve")
    xi = xi_rough(s, lifts, sol)
    xpaths = sol.trace[:, :, : s.d_X].copy()
    if n_failed:
        xpaths[failed] = np.nan
        xi[failed] = np.nan
    return grid, xpaths, xi, n_failed


def _filter_core(s: Scenario, observed, n_mc: int, seed: int, t_eval):
    grid, xpaths, xi, n_failed = decoupled_samples(s, observed, n_mc, seed)
    idx = [int(np.argmin(np.abs(grid - t))) for t in np.atleast_1d(t_eval)]
    phi_vals = s.phi(xpaths)
    return grid, idx, phi_vals, xi, n_failed


def robust_filter(s: Scenario, observed, n_mc: int, seed: int, t_eval):
    """Unnormalized estimates g^phi_t = mean of phi(X_t) exp(Xi_t) over the
    decoupled Monte-Carlo samples."""
    grid, idx, phi_vals, xi, n_failed = _filter_core(s, observed, n_mc, seed, t_eval)
    return [_weighted_stats(phi_vals[:, i], xi[:, i], "unnormalized", grid[i],
                            n_failed) for i in idx]


def normalized_filter(s: Scenario, observed, n_mc: int, seed: int, t_eval):
    """Kallianpur-Striebel ratio g^phi / g^1 on shared samples; the stderr
    comes from the delta method."""
    grid, idx, phi_vals, xi, n_failed = _filter_core(s, observed, n_mc, seed, t_eval)
    out = []
    for i in idx:
        logw = xi[:, i]
        ok = np.isfinite(logw)
        n = int(ok.sum())
        shift = np.max(logw[ok])
        w = np.exp(logw[ok] - shift)
        f = phi_vals[ok, i]
        num = np.mean(f * w)
        den = np.mean(w)
        den_se = np.std(w, ddof=1) / np.sqrt(n)
        if den <= 2.0 * den_se:
            raise DegenerateWeightsError(
                f"g^1 estimate at t={grid[i]:.4f} indistinguishable from 0")
        ratio = num / den
        cov = np.cov(np.vstack([f * w, w]))
        var = (ratio ** 2) * (cov[0, 0] / num ** 2 + cov[1, 1] / den ** 2
                              - 2.0 * cov[0, 1] / (num * den)) / n
        ess = float(w.sum() ** 2 / np.sum(w * w))
        out.append(FilterEstimate(t=float(grid[i]), value=float(ratio),
                                  stderr=float(np.sqrt(max(var, 0.0))),
                                  n_samples=n, kind="normalized", ess=ess,
                                  n_failed=n_failed))
    return out


def xi_on_truth(s: Scenario, truth: TruthRecord):
    """Rough weight along one realized (B, Y, W) triple: lift the joint path
    with Ito cross blocks, solve the reference dynamics driven by the actual
    (B, Y) block, and evaluate Xi.  Returns (xi_path, solution, lift)."""
    paths = np.concatenate([truth.B_fine, truth.W_fine], axis=0)[None]
    lifts = hybrid_lift_batch(truth.grid_fine, paths, _cross_pairs(s),
                              level=_lift_level(s),
                              inner_refine=truth.inner_refine)
    state_driver = sub_lift(lifts, list(range(s.d_noise)))
    z0 = np.concatenate([truth.X[0], np.zeros(s.d_Y)])[None]
    sol = solve_rde(state_driver, s.sigma_hat(), z0)
    return xi_rough(s, lifts, sol)[0], sol, lifts


def weight_ensemble(s: Scenario, n_paths: int, seed: int):
    """Batched reference-measure ensemble for the Girsanov suite: samples
    n_paths systems under P, returns per-path Lambda_T (left-point Ito
    exponential) and Xi_T (rough weight)."""
    fine = s.fine_grid
    r = s.inner_refine
    d_tot = s.d_noise
    W_all, B_all, _ = sample_joint_arrays(s.kernel, fine, d_tot, d_tot, n_paths, seed)
    W_obs = W_all[:, s.d_B:]
    paths = np.concatenate([B_all, W_obs], axis=1)
    lifts = hybrid_lift_batch(fine, paths, _cross_pairs(s), level=_lift_level(s),
                              inner_refine=r)
    state_driver = sub_lift(lifts, list(range(d_tot)))
    x0 = s.sample_x0(seed, n_paths)
    z0 = np.concatenate([x0, np.zeros((n_paths, s.d_Y))], axis=1)
    sol = solve_rde(state_driver, s.sigma_hat(), z0)
    xi = xi_rough(s, lifts, sol)
    grid = lifts.grid
    bvals = s.b.evaluate(sol.trace)[..., 0]       # (M, n, d_Y)
    dW = np.diff(W_obs[:, :, ::r], axis=2)        # (M, d_Y, n-1)
    dt = np.diff(grid)
    incr = np.einsum("mnj,mjn->mn", bvals[:, :-1], dW) \
        - 0.5 * np.sum(bvals[:, :-1] ** 2 * dt[None, :, None], axis=2)
    log_lam = np.sum(incr, axis=1)
    return {"grid": grid, "lambda_T": np.exp(log_lam), "log_lambda_T": log_lam,
            "xi_T": xi[:, -1], "xi": xi, "solution": sol, "lifts": lifts}


@dataclass(frozen=True)
class TrapezoidReport:
    tr_sum: float
    rough_value: float
    young_correction: float

    @property
    def defect(self) -> float:
        return self.tr_sum - self.rough_value - self.young_correction


_rhat_cache: dict = {}


def rhat_diagonal(kernel: VolterraKernel, grid) -> np.ndarray:
    """Diagonal cross-covariance path R_hat(s) = E[B_s W_s] on the grid."""
    grid = np.asarray(grid, dtype=float)
    key = (kernel.family, kernel.H, kernel.quadrature_points, grid.tobytes())
    if key not in _rhat_cache:
        _rhat_cache[key] = np.array(
            [kernel.cross_covariance(t, 0.0, t) if t > 0 else 0.0 for t in grid])
    return _rhat_cache[key]


def trapezoid_check(L: ControlledSolution, hybrid_lift, kernel: VolterraKernel,
                    d_B: int, d_Y: int, correction: str = "young") -> TrapezoidReport:
    """Trapezoid sums of L against the level-1 path, the rough integral
    against the hybrid lift, and the correction term.

    correction="young": 1/2 sum_j int L^{(W_j, Y_j)} d R_hat(s, s), the
    diagonal Young form (exact defect law for the Brownian kernel).
    correction="panel": 1/2 sum_j sum_k L^{(W_j, Y_j)}(t_k) E[dY_k dW_k]
    with the adjacent-panel kernel integrals E[dY dW]; this is the
    finite-mesh law, which for H < 1/2 grows without bound as the mesh
    refines (the Young form is its H = 1/2 specialization).
    """
    lvl1 = hybrid_lift.lvl1
    if L.trace.shape[-1] != lvl1.shape[-1]:
        raise ValueError("integrand/lift dimension mismatch")
    if L.trace.shape[0] != lvl1.shape[0] + 1:
        raise ValueError("integrand grid does not match the lift")
    tr_sum = float(np.einsum("ne,ne->", 0.5 * (L.trace[:-1] + L.trace[1:]), lvl1))
    rough = float(rough_integral(L, hybrid_lift))
    grid = hybrid_lift.grid
    corr = 0.0
    if correction == "young":
        rhat = rhat_diagonal(kernel, grid)
        for j in range(d_Y):
            comp = L.gub1[:, d_B + d_Y + j, d_B + j]
            corr += 0.5 * young_integral_1d(SampledFunction1D(grid, comp),
                                            SampledFunction1D(grid, rhat))
    elif correction == "panel":
        pw = panel_weights_cached(kernel, grid)
        adj = np.array([pw[k + 1, k] for k in range(len(grid) - 1)])
        for j in range(d_Y):
            comp = L.gub1[:-1, d_B + d_Y + j, d_B + j]
            corr += 0.5 * float(np.sum(comp * adj))
    else:
        raise ValueError(f"unknown correction mode {correction!r}")
    return TrapezoidReport(tr_sum=tr_sum, rough_value=rough,
                           young_correction=float(corr))


def density_kde(points, weights, bandwidth, x_grid) -> np.ndarray:
    """Gaussian-kernel weighted KDE, unnormalized: integrates to the weight
    sum.  ``bandwidth`` may be 'silverman' or a positive float."""
    points = np.asarray(points, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    wsum = weights.sum()
    if wsum <= 0:
        raise ValueError("all-zero weights")
    if isinstance(bandwidth, str):
        if bandwidth != "silverman":
            raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
        wn = weights / wsum
        mu = np.sum(wn * points)
        sd = np.sqrt(np.sum(wn * (points - mu) ** 2))
        neff = wsum ** 2 / np.sum(weights ** 2)
        bandwidth = 1.06 * max(sd, 1e-12) * neff ** (-0.2)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    x = np.asarray(x_grid, dtype=float)
    z = (x[:, None] - points[None, :]) / bandwidth
    dens = np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * bandwidth)
    return dens @ weights


def shift_observation(observed: TruthRecord, kernel: VolterraKernel,
                      delta: float) -> TruthRecord:
    """Cameron-Martin shift of the observed pair along the constant
    direction: Y += delta * int_0^t K(t, r) dr, W += delta * t."""
    fine = observed.grid_fine
    k1 = np.array([kernel.cross_covariance(t, 0.0, t) if t > 0 else 0.0
                   for t in fine])
    return replace(observed,
                   Y_fine=observed.Y_fine + delta * k1[None, :],
                   W_fine=observed.W_fine + delta * fine[None, :])


def estimates_to_csv(estimates, path):
    import csv

    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "value", "stderr", "n", "ess", "kind"])
        for e in estimates:
            wr.writerow([repr(e.t), repr(e.value), repr(e.stderr),
                         e.n_samples, repr(e.ess), e.kind])
    return path
