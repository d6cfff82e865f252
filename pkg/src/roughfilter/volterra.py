"""Volterra kernels, covariance evaluation, and joint (W, B) simulation.

Three kernel families: Brownian (Heaviside kernel), Mandelbrot-Van Ness
fBm and Riemann-Liouville fBm, with Hurst index H in (1/4, 1/2].  The MVN
kernel uses the standard singular-kernel representation of the fractional
integral composition, normalized so Var(B_1) = 1; RL keeps its plain
kernel (t-s)^(H-1/2)/Gamma(H+1/2).  Panel integrals of the kernel are
evaluated with substitutions that remove the endpoint singularities, never
by point evaluation at s = t.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from math import gamma

import numpy as np


@lru_cache(maxsize=16)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)

__all__ = [
    "VolterraKernel",
    "JointGaussianSample",
    "sample_joint",
    "sample_joint_arrays",
    "condition_report",
    "ConditionReport",
    "path_rng",
]

_FAMILIES = ("brownian", "mvn", "rl")


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based per-path generator: reproducible regardless of order."""
    key = np.array([seed % 2 ** 64, index % 2 ** 64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _beta(a, b):
    return gamma(a) * gamma(b) / gamma(a + b)


@dataclass(frozen=True)
class VolterraKernel:
    """K(t, s) with K(t, s) = 0 for s >= t, plus its covariance helpers."""

    family: str
    H: float = 0.5
    quadrature_points: int = 64
    T: float = field(default=np.inf, compare=False)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not (0.25 < self.H <= 0.5):
            raise ValueError("H must lie in (1/4, 1/2]")
        if self.quadrature_points < 2:
            raise ValueError("need at least 2 quadrature points")

    # -- internals -----------------------------------------------------

    @property
    def _is_brownian(self) -> bool:
        # H = 1/2 collapses both fBm families to Brownian motion exactly
        return self.family == "brownian" or self.H == 0.5

    @property
    def _c_mvn(self) -> float:
        H = self.H
        return np.sqrt(2.0 * H / ((1.0 - 2.0 * H) * _beta(1.0 - 2.0 * H, H + 0.5)))

    def _gl(self):
        return _leggauss(self.quadrature_points)

    def _check_range(self, *vals):
        for v in vals:
            v = np.asarray(v)
            if np.any(v < -1e-12) or np.any(v > self.T + 1e-12):
                raise ValueError("time outside [0, T]")

    def _mvn_kernel_arr(self, t, s):
        """MVN kernel on arrays, s < t assumed entrywise (0 < s < t)."""
        H = self.H
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        lead = (t / s) ** (H - 0.5) * (t - s) ** (H - 0.5)
        # inner integral int_s^t u^(H-3/2) (u-s)^(H-1/2) du with u = s + y^2
        gx, gw = self._gl()
        ymax = np.sqrt(t - s)
        y = 0.5 * ymax[..., None] * (gx + 1.0)
        w = 0.5 * ymax[..., None] * gw
        u = s[..., None] + y * y
        inner = np.sum(w * u ** (H - 1.5) * y ** (2.0 * H - 1.0) * 2.0 * y, axis=-1)
        return self._c_mvn * (lead - (H - 0.5) * s ** (0.5 - H) * inner)

    # -- public surface ------------------------------------------------

    def kernel_eval(self, t, s):
        """K(t, s); exactly 0 when s >= t (Volterra support)."""
        self._check_range(t, s)
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        scalar = t.ndim == 0 and s.ndim == 0
        t, s = np.broadcast_arrays(np.atleast_1d(t), np.atleast_1d(s))
        out = np.zeros(t.shape)
        live = s < t
        if self._is_brownian:
            out[live] = 1.0
        elif self.family == "rl":
            H = self.H
            out[live] = (t[live] - s[live]) ** (H - 0.5) / gamma(H + 0.5)
        else:
            inside = live & (s > 0)
            if np.any(inside):
                out[inside] = self._mvn_kernel_arr(t[inside], s[inside])
        return float(out[0]) if scalar else out

    def covariance(self, s, t):
        """R(s, t) = int_0^(s^t) K(t, r) K(s, r) dr."""
        self._check_range(s, t)
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self._is_brownian:
            return np.minimum(s, t) + 0.0
        if self.family == "mvn":
            H = self.H
            return 0.5 * (np.abs(s) ** (2 * H) + np.abs(t) ** (2 * H)
                          - np.abs(t - s) ** (2 * H))
        # RL: quadrature with sqrt substitutions at both endpoints
        scalar = s.ndim == 0 and t.ndim == 0
        s, t = np.broadcast_arrays(np.atleast_1d(s), np.atleast_1d(t))
        out = np.zeros(s.shape)
        H = self.H
        gx, gw = self._gl()
        c = 1.0 / gamma(H + 0.5) ** 2
        for idx in np.ndindex(out.shape):
            a, b = float(s[idx]), float(t[idx])
            m = min(a, b)
            if m <= 0:
                continue
            acc = 0.0
            for lo, hi, anchor in ((0.0, 0.5 * m, 0.0), (0.5 * m, m, m)):
                half = hi - lo
                y = np.sqrt(half) * 0.5 * (gx + 1.0)
                w = np.sqrt(half) * 0.5 * gw
                r = lo + y * y if anchor == 0.0 else m - y * y
                val = (b - r) ** (H - 0.5) * (a - r) ** (H - 0.5)
                acc += np.sum(w * val * 2.0 * y)
            out[idx] = c * acc
        return float(out[0]) if scalar else out

    def cross_covariance(self, t, u, v):
        """E[B_t (W_v - W_u)] = int_u^v K(t, r) dr, zero when u >= t."""
        if np.any(np.asarray(u) > np.asarray(v)):
            raise ValueError("need u <= v")
        self._check_range(t, u, v)
        t = float(t)
        u = float(u)
        v = min(float(v), t)
        if v <= u:
            return 0.0
        if self._is_brownian:
            return v - u
        if self.family == "rl":
            H = self.H
            return ((t - u) ** (H + 0.5) - (t - v) ** (H + 0.5)) / gamma(H + 1.5)
        return self._panel_integral_mvn(t, u, v)

    def _panel_integral_mvn(self, t, a, b):
        """int_a^b K(t, r) dr for the MVN kernel, b <= t."""
        gx, gw = self._gl()
        acc = 0.0
        # singular right end (r -> t): substitute r = t - y^2
        if b >= t - 1e-14:
            lo = max(a, 0.5 * (a + t))
            y1 = np.sqrt(t - lo)
            y = y1 * 0.5 * (gx + 1.0)
            w = y1 * 0.5 * gw
            r = t - y * y
            acc += np.sum(w * self._mvn_kernel_arr(np.full_like(r, t), r) * 2.0 * y)
            b = lo
            if b <= a:
                return acc
        # left end near 0: substitute r = y^2 (kernel vanishes at 0 but with
        # infinite slope)
        if a < 1e-14:
            hi = min(b, 0.5 * t)
            y1 = np.sqrt(hi)
            y = y1 * 0.5 * (gx + 1.0)
            w = y1 * 0.5 * gw
            r = y * y
            acc += np.sum(w * self._mvn_kernel_arr(np.full_like(r, t), r) * 2.0 * y)
            a = hi
            if b <= a:
                return acc
        y = a + (b - a) * 0.5 * (gx + 1.0)
        w = (b - a) * 0.5 * gw
        acc += np.sum(w * self._mvn_kernel_arr(np.full_like(y, t), y))
        return acc

    def panel_weights(self, grid: np.ndarray) -> np.ndarray:
        """W[i, j] = int over panel j of K(t_i, u) du, i, j over the grid.

        Rows are grid points, columns the intervals [t_j, t_{j+1}); zero for
        j >= i by the Volterra property.
        """
        grid = np.asarray(grid, dtype=float)
        n = len(grid)
        out = np.zeros((n, n - 1))
        if self._is_brownian:
            for i in range(1, n):
                out[i, :i] = np.diff(grid[: i + 1])
            return out
        if self.family == "rl":
            H = self.H
            c = 1.0 / gamma(H + 1.5)
            for i in range(1, n):
                ti = grid[i]
                a = grid[:i]
                b = grid[1: i + 1]
                out[i, :i] = c * ((ti - a) ** (H + 0.5) - (ti - b) ** (H + 0.5))
            return out
        gx, gw = self._gl()
        for i in range(1, n):
            ti = grid[i]
            if i >= 2:
                # regular panels, batched: nodes for all panels [t_p, t_{p+1}],
                # p < i-1, evaluated in one vectorized kernel call
                a = grid[: i - 1]
                b = grid[1: i]
                nodes = a[:, None] + (b - a)[:, None] * 0.5 * (gx + 1.0)
                wts = (b - a)[:, None] * 0.5 * gw
                vals = self._mvn_kernel_arr(np.full_like(nodes, ti), nodes)
                out[i, : i - 1] = np.sum(wts * vals, axis=1)
            # the panel adjacent to the singularity at r = t_i
            lo = grid[i - 1]
            y1 = np.sqrt(ti - lo)
            y = y1 * 0.5 * (gx + 1.0)
            w = y1 * 0.5 * gw
            r = ti - y * y
            out[i, i - 1] = np.sum(
                w * self._mvn_kernel_arr(np.full_like(r, ti), r) * 2.0 * y)
        return out


@dataclass(frozen=True)
class JointGaussianSample:
    """One realization of the pair (W, B) on a grid; W(0) = B(0) = 0."""

    grid: np.ndarray
    W: np.ndarray  # (d_W, n)
    B: np.ndarray  # (d_B, n)
    seed: int
    jitter: float = 0.0


def _joint_cov(kernel: VolterraKernel, grid: np.ndarray) -> np.ndarray:
    """Covariance of (B_{t_1..t_m}, W_{t_1..t_m}) for one component pair."""
    t = grid[1:]
    m = len(t)
    S, T = np.meshgrid(t, t, indexing="ij")
    cbb = kernel.covariance(S.ravel(), T.ravel()).reshape(m, m)
    cww = np.minimum(S, T)
    # E[B_{t_i} W_{t_j}] = int_0^{t_i ^ t_j} K(t_i, r) dr from cumulative
    # panel integrals
    cum = np.cumsum(kernel.panel_weights(grid), axis=1)
    cbw = np.empty((m, m))
    for i in range(m):
        row = cum[i + 1]
        for j in range(m):
            cbw[i, j] = row[min(i, j)]
    top = np.hstack([cbb, cbw])
    bot = np.hstack([cbw.T, cww])
    return np.vstack([top, bot])


def _chol(mat: np.ndarray):
    """Cholesky with diagonal jitter fallback; returns (L, jitter_used)."""
    try:
        return np.linalg.cholesky(mat), 0.0
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(mat) / mat.shape[0]
        for _ in range(8):
            try:
                return np.linalg.cholesky(mat + jitter * np.eye(mat.shape[0])), jitter
            except np.linalg.LinAlgError:
                jitter *= 10.0
        raise


_factor_cache: dict = {}


def panel_weights_cached(kernel: VolterraKernel, grid) -> np.ndarray:
    """Memoized kernel.panel_weights for repeated solves on one grid."""
    grid = np.asarray(grid, dtype=float)
    key = ("pw", kernel.family, kernel.H, kernel.quadrature_points, grid.tobytes())
    if key not in _factor_cache:
        _factor_cache[key] = kernel.panel_weights(grid)
    return _factor_cache[key]


def _cholesky_factor(kernel: VolterraKernel, grid: np.ndarray):
    key = ("joint", kernel.family, kernel.H, kernel.quadrature_points, grid.tobytes())
    if key not in _factor_cache:
        _factor_cache[key] = _chol(_joint_cov(kernel, grid))
    return _factor_cache[key]


def _b_marginal_factor(kernel: VolterraKernel, grid: np.ndarray):
    key = ("bmarg", kernel.family, kernel.H, kernel.quadrature_points, grid.tobytes())
    if key not in _factor_cache:
        t = grid[1:]
        S, T = np.meshgrid(t, t, indexing="ij")
        cbb = kernel.covariance(S.ravel(), T.ravel()).reshape(len(t), len(t))
        _factor_cache[key] = _chol(cbb)
    return _factor_cache[key]


def sample_joint_arrays(kernel: VolterraKernel, grid, d_B: int, d_W: int,
                        n_paths: int, seed: int, method: str = "cholesky"):
    """Batch sampler returning arrays W (n_paths, d_W, n), B (n_paths, d_B, n).

    Component i of B is driven by component i of W (i < min(d_B, d_W));
    surplus components on either side are independent.  Per-path streams are
    counter-seeded so results do not depend on execution order.
    """
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    if n_paths < 1:
        raise ValueError("n_paths >= 1 required")
    if method not in ("cholesky", "convolution"):
        raise ValueError(f"unknown method {method!r}")
    n = len(grid)
    m = n - 1
    W = np.zeros((n_paths, d_W, n))
    B = np.zeros((n_paths, d_B, n))
    jitter = 0.0
    n_joint = min(d_B, d_W)
    sqdt = np.sqrt(np.diff(grid))

    # Normals are drawn in one batch per component, keyed by (seed, component):
    # path i always reads row i of its component stream, so results do not
    # depend on n_paths or on evaluation order.
    def comp_normals(c, cols):
        rng = path_rng(seed, c)
        return rng.standard_normal((n_paths, cols))

    if method == "cholesky":
        if kernel._is_brownian:
            # the joint law (B, W) is degenerate: B = W almost surely
            for c in range(max(d_B, d_W)):
                w = np.cumsum(comp_normals(c, m) * sqdt, axis=1)
                if c < d_W:
                    W[:, c, 1:] = w
                if c < d_B:
                    B[:, c, 1:] = w
            return W, B, 0.0
        L = Lb = None
        if n_joint > 0:
            L, jitter = _cholesky_factor(kernel, grid)
        if d_B > n_joint:
            Lb, jb = _b_marginal_factor(kernel, grid)
            jitter = max(jitter, jb)
        for c in range(max(d_B, d_W)):
            if c < n_joint:
                z = comp_normals(c, 2 * m) @ L.T
                B[:, c, 1:] = z[:, :m]
                W[:, c, 1:] = z[:, m:]
            elif c < d_B:
                B[:, c, 1:] = comp_normals(c, m) @ Lb.T
            else:
                W[:, c, 1:] = np.cumsum(comp_normals(c, m) * sqdt, axis=1)
    else:
        if kernel._is_brownian:
            # unit panel means: the convolution sum is exactly the cumsum
            conv = None
        else:
            pw = kernel.panel_weights(grid)
            conv = pw / np.diff(grid)[None, :]  # panel means multiply increments
        for c in range(max(d_B, d_W)):
            dw = comp_normals(c, m) * sqdt
            cum = np.cumsum(dw, axis=1)
            if c < d_W:
                W[:, c, 1:] = cum
            if c < d_B:
                if conv is None:
                    B[:, c, 1:] = cum
                else:
                    B[:, c, :] = dw @ conv.T
    return W, B, jitter


def sample_joint(kernel: VolterraKernel, grid, d_B: int, d_W: int, n_paths: int,
                 seed: int, method: str = "cholesky"):
    """Spec-level sampler: a list of JointGaussianSample values."""
    W, B, jitter = sample_joint_arrays(kernel, grid, d_B, d_W, n_paths, seed, method)
    grid = np.asarray(grid, dtype=float)
    return [JointGaussianSample(grid=grid, W=W[i], B=B[i], seed=seed, jitter=jitter)
            for i in range(n_paths)]


@dataclass(frozen=True)
class ConditionReport:
    """Grid-level diagnostics for the covariance regularity conditions."""

    rho: float
    r_rho_var: float
    holder_ratios: np.ndarray
    holder_pass: bool
    cross_rho_var: float
    smoothing_exponent_ratio: float
    smoothing_pass: bool

    @property
    def all_pass(self) -> bool:
        return bool(self.holder_pass and self.smoothing_pass
                    and np.isfinite(self.r_rho_var) and np.isfinite(self.cross_rho_var))


def condition_report(kernel: VolterraKernel, grid, p: float | None = None) -> ConditionReport:
    """Estimate the declared covariance conditions on the supplied grid:
    2D rho-variation of R, Hoelder domination of the diagonal control,
    rho'-variation of the cross-covariance, and the p'-smoothing of K on a
    Lipschitz test path.
    """
    from .variation import SampledFunction1D, SampledFunction2D, p_variation, rho_var_2d

    grid = np.asarray(grid, dtype=float)
    if len(grid) > 65:
        idx = np.unique(np.linspace(0, len(grid) - 1, 65).astype(int))
        grid = grid[idx]
    H = kernel.H
    rho = 1.0 / (2.0 * H)
    if p is None:
        p = min(max(1.0 / H + 0.1, 2.0 + 1e-9), 4.0 - 1e-9)
    t = grid[1:]
    S, T = np.meshgrid(t, t, indexing="ij")
    R = kernel.covariance(S.ravel(), T.ravel()).reshape(len(t), len(t))
    R2 = SampledFunction2D(t, t, R)
    r_rho = rho_var_2d(R2, rho).value

    # Hoelder domination of varpi_R([s,t]^2) ~ (rho-var over the square)^rho
    ratios = []
    k = len(t)
    for width in (k - 1, (k - 1) // 2, (k - 1) // 4):
        if width < 2:
            continue
        worst = 0.0
        for s0 in range(0, k - width, max(1, width)):
            sub = rho_var_2d(R2, rho, rect=(t[s0], t[s0 + width], t[s0], t[s0 + width])).value
            worst = max(worst, sub ** rho / (t[s0 + width] - t[s0]))
        ratios.append(worst)
    ratios = np.asarray(ratios)
    holder_pass = bool(len(ratios) == 0 or np.all(ratios <= 4.0 * ratios[0] + 1e-12))

    # cross-covariance rho'-variation, rho' = 2 rho / (rho + 1)
    rho_p = 2.0 * rho / (rho + 1.0)
    C = np.empty((len(t), len(t)))
    for i, ti in enumerate(t):
        for j, tj in enumerate(t):
            C[i, j] = kernel.cross_covariance(ti, 0.0, tj)
    cross_rho = rho_var_2d(SampledFunction2D(t, t, C), rho_p).value

    # Condition-2 style smoothing: Kf for the Lipschitz path f(t) = t must be
    # p'-Hoelder-dominated, p' = 2p/(p+2)
    p_prime = 2.0 * p / (p + 2.0)
    pw = kernel.panel_weights(grid)
    f_mid = 0.5 * (grid[:-1] + grid[1:])
    kf = pw @ f_mid
    worst = 0.0
    base = None
    nn = len(grid)
    for width in (nn - 1, (nn - 1) // 2, (nn - 1) // 4):
        if width < 1:
            continue
        loc = 0.0
        for s0 in range(0, nn - width, max(1, width)):
            seg = SampledFunction1D(grid[s0: s0 + width + 1], kf[s0: s0 + width + 1])
            val = p_variation(seg, p_prime) ** p_prime / (grid[s0 + width] - grid[s0])
            loc = max(loc, val)
        if base is None:
            base = loc
        worst = max(worst, loc)
    smoothing_pass = bool(base is None or worst <= 4.0 * base + 1e-12)
    return ConditionReport(
        rho=rho,
        r_rho_var=float(r_rho),
        holder_ratios=ratios,
        holder_pass=holder_pass,
        cross_rho_var=float(cross_rho),
        smoothing_exponent_ratio=float(worst / base) if base else float("nan"),
        smoothing_pass=smoothing_pass,
    )


def export_samples_csv(samples, path, long_format=True):
    """CSV export: long format (path_id, time, W_*, B_*) or one file per path."""
    import csv
    from pathlib import Path

    samples = list(samples)
    d_w = samples[0].W.shape[0]
    d_b = samples[0].B.shape[0]
    header = ["time"] + [f"W_{i + 1}" for i in range(d_w)] + [f"B_{i + 1}" for i in range(d_b)]
    if long_format:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["path_id"] + header)
            for pid, s in enumerate(samples):
                for k, t in enumerate(s.grid):
                    wr.writerow([pid, repr(float(t))]
                                + [repr(float(v)) for v in s.W[:, k]]
                                + [repr(float(v)) for v in s.B[:, k]])
        return [Path(path)]
    paths = []
    base = Path(path)
    for pid, s in enumerate(samples):
        p = base.with_name(f"{base.stem}_{pid}{base.suffix}")
        with open(p, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for k, t in enumerate(s.grid):
                wr.writerow([repr(float(t))]
                            + [repr(float(v)) for v in s.W[:, k]]
                            + [repr(float(v)) for v in s.B[:, k]])
        paths.append(p)
    return paths
