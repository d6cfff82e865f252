"""Grid-restricted p-variation, 2D rho-variation, and Young integration.

All functionals are computed over the supplied partition lattice, never
the continuum: p-variation is an exact dynamic program over grid points,
2D rho-variation is a greedy refinement bound (flagged as such), Young
integrals are left-point sums on the common refinement with linear
interpolation.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._accel import USING_NUMBA, maybe_njit

__all__ = [
    "SampledFunction1D",
    "SampledFunction2D",
    "p_variation",
    "rho_var_2d",
    "RhoVar2D",
    "young_integral_1d",
    "young_integral_2d",
    "greedy_partition_count",
]


@dataclass(frozen=True)
class SampledFunction1D:
    """Vector-valued function sampled on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray  # (n,) or (n, m)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or len(t) < 1:
            raise ValueError("times must be a 1-d array")
        if t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing and start at >= 0")
        if v.shape[0] != len(t) or not np.all(np.isfinite(v)):
            raise ValueError("values must be finite with one row per time")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v if v.ndim > 1 else v[:, None])


@dataclass(frozen=True)
class SampledFunction2D:
    """Real function sampled on a rectangular grid (e.g. a covariance)."""

    s_grid: np.ndarray
    u_grid: np.ndarray
    values: np.ndarray  # (len(s_grid), len(u_grid))

    def __post_init__(self):
        s = np.asarray(self.s_grid, dtype=float)
        u = np.asarray(self.u_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if np.any(np.diff(s) <= 0) or np.any(np.diff(u) <= 0):
            raise ValueError("grids must be strictly increasing")
        if v.shape != (len(s), len(u)) or not np.all(np.isfinite(v)):
            raise ValueError("values must be finite with shape (len(s), len(u))")
        object.__setattr__(self, "s_grid", s)
        object.__setattr__(self, "u_grid", u)
        object.__setattr__(self, "values", v)


@maybe_njit
def _pvar_dp_loops(values, p):
    n = values.shape[0]
    m = values.shape[1]
    best = np.zeros(n)
    for j in range(1, n):
        top = -1.0
        for i in range(j):
            s = 0.0
            for k in range(m):
                dv = values[j, k] - values[i, k]
                s += dv * dv
            cand = best[i] + s ** (0.5 * p)
            if cand > top:
                top = cand
        best[j] = top
    return best[n - 1]


def _pvar_dp_numpy(values, p):
    n = values.shape[0]
    best = np.zeros(n)
    for j in range(1, n):
        d = values[j] - values[:j]
        incr = np.sum(d * d, axis=1) ** (0.5 * p)
        best[j] = np.max(best[:j] + incr)
    return best[-1]


def pvar_power_sum(values: np.ndarray, p: float) -> float:
    """sup over subpartitions of sum ||increment||^p (the DP core, not rooted)."""
    values = np.ascontiguousarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] < 2:
        return 0.0
    if USING_NUMBA:
        return float(_pvar_dp_loops(values, p))
    return float(_pvar_dp_numpy(values, p))


def p_variation(f: SampledFunction1D, p: float) -> float:
    """Exact grid p-variation (sup over subpartitions of the given grid)."""
    if p < 1:
        raise ValueError("p-variation requires p >= 1")
    if f.values.shape[0] < 2:
        raise ValueError("need at least 2 sample points")
    return pvar_power_sum(f.values, p) ** (1.0 / p)


@maybe_njit
def _dp_over_matrix(powmat):
    n = powmat.shape[0]
    best = np.zeros(n)
    for j in range(1, n):
        top = -1.0
        for i in range(j):
            cand = best[i] + powmat[i, j]
            if cand > top:
                top = cand
        best[j] = top
    return best


def _dp_over_matrix_numpy(powmat):
    n = powmat.shape[0]
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = np.max(best[:j] + powmat[:j, j])
    return best


def dp_over_matrix(powmat: np.ndarray) -> np.ndarray:
    """DP over a precomputed ||increment||^p matrix; returns best[0..n-1]."""
    powmat = np.ascontiguousarray(powmat, dtype=float)
    if USING_NUMBA:
        return _dp_over_matrix(powmat)
    return _dp_over_matrix_numpy(powmat)


class RhoVar2D(NamedTuple):
    value: float
    lower_bound: bool


def _grid_sum(R, rho):
    if R.shape[0] < 2 or R.shape[1] < 2:
        return 0.0
    inc = np.diff(np.diff(R, axis=0), axis=1)
    return float(np.sum(np.abs(inc) ** rho))


def rho_var_2d(R: SampledFunction2D, rho: float, rect=None) -> RhoVar2D:
    """Greedy lower bound for the 2D (rho, rho)-variation over grid-like
    subpartitions of ``rect``.  Exact sup would need an exponential search;
    the returned value is always a valid lower bound (flagged).
    """
    if rho < 1:
        raise ValueError("rho must be >= 1")
    if rect is None:
        rect = (R.s_grid[0], R.s_grid[-1], R.u_grid[0], R.u_grid[-1])
    s0, s1, u0, u1 = rect
    si = np.where((R.s_grid >= s0 - 1e-12) & (R.s_grid <= s1 + 1e-12))[0]
    ui = np.where((R.u_grid >= u0 - 1e-12) & (R.u_grid <= u1 + 1e-12))[0]
    if len(si) == 0 or len(ui) == 0 or s0 < R.s_grid[0] - 1e-12 or s1 > R.s_grid[-1] + 1e-12 \
            or u0 < R.u_grid[0] - 1e-12 or u1 > R.u_grid[-1] + 1e-12:
        raise ValueError("rectangle outside the sampled grids")
    if s1 - s0 <= 0 or u1 - u0 <= 0:
        return RhoVar2D(0.0, True)
    sub = R.values[np.ix_(si, ui)]
    ns, nu = sub.shape
    best = _grid_sum(sub, rho)

    # dyadic sublattices of the full lattice
    step = 2
    while ns // step >= 2 or nu // step >= 2:
        ss = np.unique(np.r_[np.arange(0, ns, step), ns - 1])
        uu = np.unique(np.r_[np.arange(0, nu, step), nu - 1])
        best = max(best, _grid_sum(sub[np.ix_(ss, uu)], rho))
        step *= 2

    # greedy refinement from the corner lines
    ss = [0, ns - 1]
    uu = [0, nu - 1]
    cur = _grid_sum(sub[np.ix_(ss, uu)], rho)
    best = max(best, cur)
    for _ in range(ns + nu):
        gain, pick = 0.0, None
        for cand in range(1, ns - 1):
            if cand in ss:
                continue
            val = _grid_sum(sub[np.ix_(sorted(ss + [cand]), uu)], rho)
            if val - cur > gain:
                gain, pick = val - cur, ("s", cand)
        for cand in range(1, nu - 1):
            if cand in uu:
                continue
            val = _grid_sum(sub[np.ix_(ss, sorted(uu + [cand]))], rho)
            if val - cur > gain:
                gain, pick = val - cur, ("u", cand)
        if pick is None:
            break
        if pick[0] == "s":
            ss = sorted(ss + [pick[1]])
        else:
            uu = sorted(uu + [pick[1]])
        cur += gain
        best = max(best, cur)
    return RhoVar2D(best ** (1.0 / rho), True)


def _common_refinement(f: SampledFunction1D, g: SampledFunction1D):
    t = np.union1d(f.times, g.times)
    t = t[(t >= max(f.times[0], g.times[0])) & (t <= min(f.times[-1], g.times[-1]))]
    fv = np.column_stack([np.interp(t, f.times, f.values[:, k]) for k in range(f.values.shape[1])])
    gv = np.column_stack([np.interp(t, g.times, g.values[:, k]) for k in range(g.values.shape[1])])
    return t, fv, gv


def young_integral_1d(f: SampledFunction1D, g: SampledFunction1D) -> float:
    """Left-point Riemann-Stieltjes sum of f against dg on the common
    refinement; vector values are paired by the inner product."""
    if f.values.shape[1] != g.values.shape[1]:
        raise ValueError("f and g must have the same number of components")
    _, fv, gv = _common_refinement(f, g)
    return float(np.sum(fv[:-1] * np.diff(gv, axis=0)))


def young_integral_2d(f: SampledFunction2D, g: SampledFunction2D, rect=None) -> float:
    """Left-point 2D Young sum: sum f(s_i, u_j) * g(2D increment of the cell)."""
    if rect is None:
        rect = (max(f.s_grid[0], g.s_grid[0]), min(f.s_grid[-1], g.s_grid[-1]),
                max(f.u_grid[0], g.u_grid[0]), min(f.u_grid[-1], g.u_grid[-1]))
    s0, s1, u0, u1 = rect
    for grid, lo, hi in ((f.s_grid, s0, s1), (f.u_grid, u0, u1),
                         (g.s_grid, s0, s1), (g.u_grid, u0, u1)):
        if lo < grid[0] - 1e-12 or hi > grid[-1] + 1e-12:
            raise ValueError("rectangle outside the sampled grids")
    if s1 - s0 <= 0 or u1 - u0 <= 0:
        return 0.0
    s = np.union1d(f.s_grid, g.s_grid)
    s = s[(s >= s0) & (s <= s1)]
    u = np.union1d(f.u_grid, g.u_grid)
    u = u[(u >= u0) & (u <= u1)]

    def bilinear(h: SampledFunction2D):
        rows = np.column_stack([np.interp(s, h.s_grid, h.values[:, j])
                                for j in range(h.values.shape[1])])
        return np.column_stack([np.interp(u, h.u_grid, rows[i, :]) for i in range(len(s))]).T

    fv = bilinear(f)
    gv = bilinear(g)
    ginc = np.diff(np.diff(gv, axis=0), axis=1)
    return float(np.sum(fv[:-1, :-1] * ginc))


def greedy_partition_count(lift, alpha: float, p: float) -> int:
    """Number of greedy breakpoints before T: walking from the previous
    breakpoint, a new one is set at the first grid point where the local
    homogeneous p-variation^p reaches alpha.  Satisfies
    alpha * N <= (grid p-variation)^p by superadditivity of the DP value.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    from .lift import increment_power_matrix

    powmat = increment_power_matrix(lift, p)
    n = powmat.shape[0]
    count = 0
    start = 0
    while start < n - 1:
        best = np.zeros(n - start)
        hit = -1
        for j in range(1, n - start):
            best[j] = np.max(best[:j] + powmat[start:start + j, start + j])
            if best[j] >= alpha:
                hit = start + j
                break
        if hit < 0 or hit == n - 1:
            break
        count += 1
        start = hit
    return count
