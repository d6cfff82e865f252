"""Geometric and Ito-hybrid rough-path lifts of sampled paths.

``lift_segmentwise`` is the canonical piecewise-linear lift (every interval
carries the signature of its chord).  ``lift_joint_hybrid`` builds the joint
lift of a Volterra block together with the Brownian drivers of designated
observation components: for each such pair the second-level cross entry is
the left-point Ito sum on an inner refinement, its partner is forced by
geometricity, and the third level is completed through the Lie projection so
every stored increment is exactly group-like.
"""

from dataclasses import dataclass, field

import numpy as np

from ._accel import USING_NUMBA, maybe_njit
from .tensor import (
    GroupIncrement,
    exp_from_lie,
    lie_project_level3,
    tensor_mul,
)
from .variation import dp_over_matrix

__all__ = [
    "LiftedPath",
    "LiftBatch",
    "lift_segmentwise",
    "lift_joint_hybrid",
    "hybrid_lift_batch",
    "sub_lift",
    "composed_increment",
    "chen_residual",
    "increment_power_matrix",
    "lift_p_variation",
    "lift_distance",
    "dyadic_convergence_study",
    "default_p_level",
    "export_lift_csv",
]


def default_p_level(H: float):
    """p = 1/H + 0.1 clamped to (2, 4); level 2 below p = 3, else 3."""
    p = min(max(1.0 / H + 0.1, 2.0 + 1e-6), 4.0 - 1e-6)
    return p, (2 if p < 3 else 3)


@dataclass(frozen=True)
class LiftedPath:
    """Per-interval group increments of a lifted path on a time grid."""

    grid: np.ndarray
    level: int
    lvl1: np.ndarray  # (n-1, d)
    lvl2: np.ndarray  # (n-1, d, d)
    lvl3: np.ndarray | None = None
    mode: str = "geometric"
    block_labels: dict = field(default_factory=dict)
    cross_pairs: tuple = ()

    def __post_init__(self):
        # stored composites: running products g_{0,i}, kept alongside the
        # per-interval increments (chen_residual validates them against the
        # chain)
        object.__setattr__(self, "_prefix", _running_products(self))

    @property
    def d(self) -> int:
        return self.lvl1.shape[1]

    @property
    def n_intervals(self) -> int:
        return self.lvl1.shape[0]

    @property
    def prefixes(self):
        return self._prefix

    def increment(self, i: int) -> GroupIncrement:
        return GroupIncrement(
            d=self.d, level=self.level,
            level1=self.lvl1[i], level2=self.lvl2[i],
            level3=self.lvl3[i] if self.level == 3 else None,
            geometric=True,
        )


@dataclass(frozen=True)
class LiftBatch:
    """Lifts of many paths sharing one grid (arrays lead with the path axis)."""

    grid: np.ndarray
    level: int
    lvl1: np.ndarray  # (M, n-1, d)
    lvl2: np.ndarray  # (M, n-1, d, d)
    lvl3: np.ndarray | None = None
    mode: str = "geometric"
    cross_pairs: tuple = ()

    def path(self, m: int) -> LiftedPath:
        return LiftedPath(
            grid=self.grid, level=self.level,
            lvl1=self.lvl1[m], lvl2=self.lvl2[m],
            lvl3=self.lvl3[m] if self.lvl3 is not None else None,
            mode=self.mode, cross_pairs=self.cross_pairs,
        )


def _segment_levels(delta, level):
    """Batched chord signatures: delta (..., d) -> levels."""
    l2 = 0.5 * np.einsum("...i,...j->...ij", delta, delta)
    l3 = None
    if level == 3:
        l3 = np.einsum("...i,...j,...k->...ijk", delta, delta, delta) / 6.0
    return l2, l3


def lift_segmentwise(times, values, level: int = 2) -> LiftedPath:
    """Canonical piecewise-linear (geometric) lift of a sampled path.

    ``values`` is (n, d) or (d, n) with n matching ``times``.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != len(times) and values.shape[1] == len(times):
        values = values.T
    if len(times) < 2:
        raise ValueError("need at least 2 grid points")
    delta = np.diff(values, axis=0)
    l2, l3 = _segment_levels(delta, level)
    return LiftedPath(grid=times, level=level, lvl1=delta, lvl2=l2, lvl3=l3,
                      mode="geometric")


# -- Ito-hybrid construction ------------------------------------------------

@maybe_njit
def _hybrid_accumulate(delta, pa, pb, want3):
    """Per coarse interval, accumulate level 2 (geometric except Ito pairs,
    partner completed) and the raw left-point level 3 on the inner grid.

    delta: (M, nc, r, d) fine increments; pa/pb: int arrays of Ito pairs.
    Returns lvl2 (M, nc, d, d) and lvl3 (M, nc, d, d, d) (zeros if not want3).
    """
    M, nc, r, d = delta.shape
    lvl2 = np.zeros((M, nc, d, d))
    lvl3 = np.zeros((M, nc, d, d, d)) if want3 else np.zeros((1, 1, 1, 1, 1))
    npair = len(pa)
    for m in range(M):
        for k in range(nc):
            P = np.zeros(d)
            G = np.zeros((d, d))
            H = np.zeros((d, d, d))
            for s in range(r):
                dx = delta[m, k, s]
                if want3:
                    for i in range(d):
                        for j in range(d):
                            gij = G[i, j]
                            if gij != 0.0:
                                for l in range(d):
                                    H[i, j, l] += gij * dx[l]
                # geometric update of all pairs (chord-exact within the step)
                for i in range(d):
                    for j in range(d):
                        G[i, j] += P[i] * dx[j] + 0.5 * dx[i] * dx[j]
                P = P + dx
                # Ito overrides (left-point: drop the half chord square) and
                # their geometricity completion
                for q in range(npair):
                    a = pa[q]
                    b = pb[q]
                    G[a, b] -= 0.5 * dx[a] * dx[b]
                    G[b, a] = P[a] * P[b] - G[a, b]
            lvl2[m, k] = G
            if want3:
                lvl3[m, k] = H
    return lvl2, lvl3


def _hybrid_levels(delta, cross_pairs, level):
    """Dispatch to the numba kernel or the numpy fallback."""
    pa = np.array([p[0] for p in cross_pairs], dtype=np.int64)
    pb = np.array([p[1] for p in cross_pairs], dtype=np.int64)
    want3 = level == 3
    if USING_NUMBA:
        lvl2, lvl3 = _hybrid_accumulate(np.ascontiguousarray(delta), pa, pb, want3)
        return lvl2, (lvl3 if want3 else None)
    # numpy fallback
    M, nc, r, d = delta.shape
    tot = delta.sum(axis=2)
    lvl2 = 0.5 * np.einsum("mki,mkj->mkij", tot, tot)
    pexcl = np.cumsum(delta, axis=2) - delta
    for a, b in zip(pa, pb):
        ito = np.einsum("mkr,mkr->mk", pexcl[..., a], delta[..., b])
        lvl2[..., a, b] = ito
        lvl2[..., b, a] = tot[..., a] * tot[..., b] - ito
    if not want3:
        return lvl2, None
    lvl3 = np.zeros((M, nc, d, d, d))
    G = np.zeros((M, nc, d, d))
    P = np.zeros((M, nc, d))
    for s in range(r):
        dx = delta[:, :, s, :]
        lvl3 += np.einsum("mkij,mkl->mkijl", G, dx)
        G = G + np.einsum("mki,mkj->mkij", P, dx) \
            + 0.5 * np.einsum("mki,mkj->mkij", dx, dx)
        P = P + dx
        for a, b in zip(pa, pb):
            run_ito = np.einsum("mkr,mkr->mk", pexcl[:, :, : s + 1, a],
                                delta[:, :, : s + 1, b])
            G[..., a, b] = run_ito
            G[..., b, a] = P[..., a] * P[..., b] - run_ito
    return lvl2, lvl3


def _complete_level3(lvl1, lvl2, lvl3_raw, cross_pairs):
    """Replace level 3 by the exactly group-like completion.

    Words not involving an Ito pair keep their chord value; words involving
    one keep the Lie content of the raw left-point sums.  Taking
    exp(project(log(.))) changes only level 3 and restores the shuffle
    identities to rounding.
    """
    M, nc, d = lvl1.shape
    mask = np.zeros((d, d, d), dtype=bool)
    for a, b in cross_pairs:
        for axes in ((0, 1), (0, 2), (1, 2)):
            idx = [slice(None)] * 3
            idx[axes[0]], idx[axes[1]] = a, b
            mask[tuple(idx)] = True
            idx[axes[0]], idx[axes[1]] = b, a
            mask[tuple(idx)] = True
    chord3 = np.einsum("mki,mkj,mkl->mkijl", lvl1, lvl1, lvl1) / 6.0
    raw = np.where(mask[None, None], lvl3_raw, chord3)
    # truncated log at level 3
    x1, x2, x3 = lvl1, lvl2, raw
    x1x2 = np.einsum("mki,mkjl->mkijl", x1, x2) + np.einsum("mkij,mkl->mkijl", x2, x1)
    x1cube = np.einsum("mki,mkj,mkl->mkijl", x1, x1, x1)
    ell3 = x3 - 0.5 * x1x2 + x1cube / 3.0
    # Dynkin projection onto the Lie subspace, batched
    t = ell3
    proj = (t - np.transpose(t, (0, 1, 3, 2, 4))
            - np.transpose(t, (0, 1, 4, 2, 3))
            + np.transpose(t, (0, 1, 4, 3, 2))) / 3.0
    ell2 = x2 - 0.5 * np.einsum("mki,mkj->mkij", x1, x1)
    l1l2 = np.einsum("mki,mkjl->mkijl", x1, ell2) + np.einsum("mkij,mkl->mkijl", ell2, x1)
    return proj + 0.5 * l1l2 + x1cube / 6.0


def hybrid_lift_batch(fine_grid, paths, cross_pairs, level: int = 2,
                      inner_refine: int = 8, block_labels=None) -> LiftBatch:
    """Joint Ito-hybrid lift for a batch of paths.

    paths: (M, d, n_fine) values on ``fine_grid``; the lift lives on the
    coarse grid taking every ``inner_refine``-th point.
    """
    fine_grid = np.asarray(fine_grid, dtype=float)
    paths = np.asarray(paths, dtype=float)
    if paths.ndim == 2:
        paths = paths[None]
    M, d, n_fine = paths.shape
    if (n_fine - 1) % inner_refine != 0:
        raise ValueError("fine grid must refine the lift grid evenly")
    for a, b in cross_pairs:
        if not (0 <= a < d and 0 <= b < d):
            raise ValueError("cross pair outside path dimensions")
    coarse = fine_grid[::inner_refine]
    nc = len(coarse) - 1
    delta = np.diff(paths, axis=2)  # (M, d, n_fine-1)
    delta = delta.reshape(M, d, nc, inner_refine).transpose(0, 2, 3, 1)  # (M,nc,r,d)
    lvl1 = delta.sum(axis=2)
    lvl2, lvl3_raw = _hybrid_levels(delta, cross_pairs, level)
    # re-apply the geometricity completion with the final level-1 values so
    # the pair sums to the level-1 product exactly, independent of backend
    # summation order
    for a, b in cross_pairs:
        lvl2[..., b, a] = lvl1[..., a] * lvl1[..., b] - lvl2[..., a, b]
    lvl3 = None
    if level == 3:
        lvl3 = _complete_level3(lvl1, lvl2, lvl3_raw, cross_pairs)
    return LiftBatch(grid=coarse, level=level, lvl1=lvl1, lvl2=lvl2, lvl3=lvl3,
                     mode="ito_cross", cross_pairs=tuple(cross_pairs))


def lift_joint_hybrid(sample, obs_block, level: int = 2,
                      inner_refine: int = 8) -> LiftedPath:
    """Joint lift of (B-block, W drivers of the observation components).

    ``sample`` is a JointGaussianSample on the fine grid; ``obs_block`` lists
    the B components whose own Brownian drivers join the path.  Cross pair
    (j, position of W^j) carries the left-point Ito integral.
    """
    obs_block = tuple(obs_block)
    d_b = sample.B.shape[0]
    for o in obs_block:
        if o >= sample.W.shape[0]:
            raise ValueError(f"observation component {o} has no sampled W block")
    path = np.vstack([sample.B] + [sample.W[o][None, :] for o in obs_block])
    cross_pairs = tuple((o, d_b + k) for k, o in enumerate(obs_block))
    labels = {i: ("observation" if i in obs_block else "volterra") for i in range(d_b)}
    labels.update({d_b + k: "brownian" for k in range(len(obs_block))})
    batch = hybrid_lift_batch(sample.grid, path[None], cross_pairs, level, inner_refine)
    lifted = batch.path(0)
    return LiftedPath(grid=lifted.grid, level=lifted.level, lvl1=lifted.lvl1,
                      lvl2=lifted.lvl2, lvl3=lifted.lvl3, mode="ito_cross",
                      block_labels=labels, cross_pairs=cross_pairs)


def sub_lift(lift, coords) -> "LiftedPath":
    """Restriction of a lift to a coordinate subset (contiguous sub-block of
    the tensor levels).  Geometric if no Ito pair survives."""
    coords = list(coords)
    pairs = tuple((coords.index(a), coords.index(b)) for a, b in lift.cross_pairs
                  if a in coords and b in coords)
    ix = np.asarray(coords)
    lvl3 = None
    if lift.level == 3 and lift.lvl3 is not None:
        lvl3 = lift.lvl3[..., ix[:, None, None], ix[None, :, None], ix[None, None, :]]
    out = dict(
        grid=lift.grid, level=lift.level,
        lvl1=lift.lvl1[..., ix],
        lvl2=lift.lvl2[..., ix[:, None], ix[None, :]],
        lvl3=lvl3,
        mode="geometric" if not pairs else "ito_cross",
        cross_pairs=pairs,
    )
    if isinstance(lift, LiftBatch):
        return LiftBatch(**out)
    return LiftedPath(**out)


# -- composition, residuals, distances --------------------------------------

def composed_increment(lift: LiftedPath, i: int, j: int) -> GroupIncrement:
    """Chen composition of the stored increments over grid interval [i, j]."""
    if not (0 <= i <= j <= lift.n_intervals):
        raise ValueError("interval outside grid")
    g = GroupIncrement(
        d=lift.d, level=lift.level,
        level1=np.zeros(lift.d), level2=np.zeros((lift.d, lift.d)),
        level3=np.zeros((lift.d,) * 3) if lift.level == 3 else None,
        geometric=True)
    for k in range(i, j):
        g = tensor_mul(g, lift.increment(k))
    return g


def _running_products(lift) -> tuple:
    """Running products g_{0,i} as arrays (index 0 is the identity)."""
    n = lift.lvl1.shape[0]
    d = lift.lvl1.shape[1]
    P1 = np.zeros((n + 1, d))
    P2 = np.zeros((n + 1, d, d))
    P3 = np.zeros((n + 1, d, d, d)) if lift.level == 3 else None
    for k in range(n):
        a1, a2 = P1[k], P2[k]
        b1, b2 = lift.lvl1[k], lift.lvl2[k]
        P1[k + 1] = a1 + b1
        P2[k + 1] = a2 + b2 + np.outer(a1, b1)
        if lift.level == 3:
            b3 = lift.lvl3[k]
            P3[k + 1] = (P3[k] + b3 + np.einsum("i,jk->ijk", a1, b2)
                         + np.einsum("ij,k->ijk", a2, b1))
    return P1, P2, P3


def _prefix_levels(lift: LiftedPath):
    return lift.prefixes


def _pair_levels_from_prefix(P1, P2, P3, i):
    """Increments g_{i,j} for all j >= i, batched over j."""
    a1, a2 = P1[i], P2[i]
    inv1 = -a1
    inv2 = -a2 + np.outer(a1, a1)
    l1 = P1[i:] + inv1
    l2 = P2[i:] + inv2 + np.einsum("i,nj->nij", inv1, P1[i:])
    l3 = None
    if P3 is not None:
        a3 = P3[i]
        inv3 = -a3 + np.einsum("i,jk->ijk", a1, a2) + np.einsum("ij,k->ijk", a2, a1) \
            - np.einsum("i,j,k->ijk", a1, a1, a1)
        l3 = (P3[i:] + inv3 + np.einsum("i,njk->nijk", inv1, P2[i:])
              + np.einsum("ij,nk->nijk", inv2, P1[i:]))
    return l1, l2, l3


def _homog_norm_batch(l1, l2, l3):
    n1 = np.linalg.norm(l1, axis=-1)
    n2 = np.sqrt(2.0 * np.linalg.norm(l2, axis=(-2, -1)))
    out = np.maximum(n1, n2)
    if l3 is not None:
        n3 = (6.0 * np.sqrt(np.sum(l3 * l3, axis=(-3, -2, -1)))) ** (1.0 / 3.0)
        out = np.maximum(out, n3)
    return out


def increment_power_matrix(lift: LiftedPath, p: float) -> np.ndarray:
    """D[i, j] = homogeneous_norm(g_{i,j})^p over all grid index pairs."""
    P1, P2, P3 = _prefix_levels(lift)
    n = lift.n_intervals + 1
    D = np.zeros((n, n))
    for i in range(n):
        l1, l2, l3 = _pair_levels_from_prefix(P1, P2, P3, i)
        D[i, i:] = _homog_norm_batch(l1, l2, l3) ** p
    return D


def lift_p_variation(lift: LiftedPath, p: float) -> float:
    """Homogeneous p-variation of the lift over its grid."""
    D = increment_power_matrix(lift, p)
    return float(dp_over_matrix(D)[-1] ** (1.0 / p))


def lift_distance(a: LiftedPath, b: LiftedPath, p: float) -> float:
    """Homogeneous p-variation distance evaluated on the common (coarser)
    grid: sup over subpartitions of sum norm(a_I^{-1} b_I)^p, rooted."""
    if len(a.grid) > len(b.grid):
        a, b = b, a
    # align b to a's grid by index matching
    pos = np.searchsorted(b.grid, a.grid)
    if not np.allclose(b.grid[pos], a.grid, atol=1e-12):
        raise ValueError("grids are not nested")
    PA = _prefix_levels(a)
    PB = _prefix_levels(b)
    n = a.n_intervals + 1
    D = np.zeros((n, n))
    for i in range(n):
        la = _pair_levels_from_prefix(*PA, i)
        lb1, lb2, lb3 = _pair_levels_from_prefix(*PB, pos[i])
        lb1, lb2 = lb1[pos[i:] - pos[i]], lb2[pos[i:] - pos[i]]
        lb3 = lb3[pos[i:] - pos[i]] if lb3 is not None else None
        # difference increment a^{-1} (x) b
        ia1 = -la[0]
        ia2 = -la[1] + np.einsum("ni,nj->nij", la[0], la[0])
        d1 = ia1 + lb1
        d2 = ia2 + lb2 + np.einsum("ni,nj->nij", ia1, lb1)
        d3 = None
        if a.level == 3:
            ia3 = (-la[2] + np.einsum("ni,njk->nijk", la[0], la[1])
                   + np.einsum("nij,nk->nijk", la[1], la[0])
                   - np.einsum("ni,nj,nk->nijk", la[0], la[0], la[0]))
            d3 = (ia3 + lb3 + np.einsum("ni,njk->nijk", ia1, lb2)
                  + np.einsum("nij,nk->nijk", ia2, lb1))
        D[i, i:] = _homog_norm_batch(d1, d2, d3) ** p
    return float(dp_over_matrix(D)[-1] ** (1.0 / p))


def prefix_increment(lift: LiftedPath, i: int, j: int) -> GroupIncrement:
    """g_{i,j} derived from the stored composites: inv(g_{0,i}) (x) g_{0,j}."""
    P1, P2, P3 = lift.prefixes
    l1, l2, l3 = _pair_levels_from_prefix(P1, P2, P3, i)
    k = j - i
    return GroupIncrement(d=lift.d, level=lift.level, level1=l1[k], level2=l2[k],
                          level3=l3[k] if l3 is not None else None, geometric=True)


def chen_residual(lift: LiftedPath, n_triples: int = 64, seed: int = 0) -> float:
    """Entrywise gap between the stored-composite increment g_{s,u} and the
    chain g_{s,t} (x) g_{t,u} over random grid triples; detects increments
    inconsistent with the composites."""
    n = lift.n_intervals
    if n < 1:
        return 0.0
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_triples):
        s, t, u = sorted(rng.integers(0, n + 1, size=3))
        whole = prefix_increment(lift, s, u)
        parts = tensor_mul(composed_increment(lift, s, t), composed_increment(lift, t, u))
        gap = np.max(np.abs(whole.level1 - parts.level1))
        gap = max(gap, np.max(np.abs(whole.level2 - parts.level2)))
        if lift.level == 3:
            gap = max(gap, np.max(np.abs(whole.level3 - parts.level3)))
        worst = max(worst, gap)
    return float(worst)


def dyadic_convergence_study(kernel, dims: int, n_min: int, n_max: int, p: float,
                             n_paths: int, seed: int, T: float = 1.0):
    """Distances between lifts on successive dyadic grids, per refinement level.

    Paths are sampled once on the finest grid and restricted; rows report
    (n, mean distance, max distance) between the 2^n and 2^(n+1) lifts
    evaluated on the 2^n grid.
    """
    from .volterra import sample_joint_arrays

    if not (n_min < n_max <= 14):
        raise ValueError("need n_min < n_max <= 14")
    level = 2 if p < 3 else 3
    fine = np.linspace(0.0, T, 2 ** n_max + 1)
    _, B, _ = sample_joint_arrays(kernel, fine, dims, 0, n_paths, seed)
    rows = []
    dists = np.zeros((n_paths, n_max - n_min))
    for ip in range(n_paths):
        lifts = {}
        for n in range(n_min, n_max + 1):
            step = 2 ** (n_max - n)
            lifts[n] = lift_segmentwise(fine[::step], B[ip, :, ::step].T, level)
        for col, n in enumerate(range(n_min, n_max)):
            dists[ip, col] = lift_distance(lifts[n], lifts[n + 1], p)
    for col, n in enumerate(range(n_min, n_max)):
        rows.append((n, float(dists[:, col].mean()), float(dists[:, col].max())))
    return rows


def export_lift_csv(lift: LiftedPath, path):
    """CSV rows (t_start, t_end, word, value); words are 1-based digit strings."""
    import csv

    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t_start", "t_end", "word", "value"])
        for k in range(lift.n_intervals):
            t0, t1 = repr(float(lift.grid[k])), repr(float(lift.grid[k + 1]))
            for i in range(lift.d):
                wr.writerow([t0, t1, f"{i + 1}", repr(float(lift.lvl1[k, i]))])
            for i in range(lift.d):
                for j in range(lift.d):
                    wr.writerow([t0, t1, f"{i + 1}{j + 1}",
                                 repr(float(lift.lvl2[k, i, j]))])
            if lift.level == 3:
                for i in range(lift.d):
                    for j in range(lift.d):
                        for l in range(lift.d):
                            wr.writerow([t0, t1, f"{i + 1}{j + 1}{l + 1}",
                                         repr(float(lift.lvl3[k, i, j, l]))])
    return path
