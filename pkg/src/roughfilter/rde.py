"""Controlled paths, rough integration, and RDE solvers.

The stepping scheme is the explicit increment expansion: per grid interval
the state advances by sigma * lvl1 + (grad sigma sigma) * lvl2 and, on
level-3 lifts, the third-order term built from the Hessian.  The Volterra
solver adds the memory drift through panel-integrated kernel weights with
left-point drift values.  Everything is batched over a leading path axis so
Monte Carlo sweeps run vectorized.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "VectorField",
    "ControlledSolution",
    "rough_integral",
    "solve_rde",
    "solve_rde_volterra",
    "solve_jacobian",
    "compose_observation_functional",
    "BlowUpError",
    "export_solution_csv",
]


class BlowUpError(RuntimeError):
    """State escaped the configured bound; carries the offending step."""

    def __init__(self, step, t, value):
        self.step = step
        self.t = t
        self.value = value
        super().__init__(f"state blow-up at step {step} (t={t}): |y| = {value:.3e}")


@dataclass
class VectorField:
    """Map y -> matrix sigma(y) of shape (d_out, d_in), batched over leading
    axes, with analytic or finite-difference derivatives.

    ``fn`` takes (..., d_state) and returns (..., d_out, d_in).  ``jac``
    returns (..., d_out, d_in, d_state); ``hess`` appends one more state
    axis.  Missing derivatives fall back to central differences with step
    1e-5 (1 + |y|), flagged through ``uses_fd``.
    """

    fn: Callable
    d_state: int
    d_out: int
    d_in: int
    jac: Callable | None = None
    hess: Callable | None = None
    name: str = "field"
    smoothness_tag: int = 3

    @property
    def uses_fd(self):
        return self.jac is None or self.hess is None

    def evaluate(self, y):
        out = np.asarray(self.fn(np.asarray(y, dtype=float)))
        if out.shape[-2:] != (self.d_out, self.d_in):
            raise ValueError(f"{self.name}: evaluate returned shape {out.shape}, "
                             f"expected (..., {self.d_out}, {self.d_in})")
        return out

    def _fd_step(self, y):
        return 1e-5 * (1.0 + np.linalg.norm(np.asarray(y), axis=-1))

    def jacobian(self, y):
        y = np.asarray(y, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(y))
        h = self._fd_step(y)[..., None, None]
        cols = []
        for m in range(self.d_state):
            e = np.zeros(self.d_state)
            e[m] = 1.0
            hm = h[..., 0, 0][..., None] * e
            cols.append((self.evaluate(y + hm) - self.evaluate(y - hm))
                        / (2.0 * h[..., 0, 0][..., None, None]))
        return np.stack(cols, axis=-1)

    def hessian(self, y):
        y = np.asarray(y, dtype=float)
        if self.hess is not None:
            return np.asarray(self.hess(y))
        h = self._fd_step(y)
        cols = []
        for m in range(self.d_state):
            e = np.zeros(self.d_state)
            e[m] = 1.0
            hm = h[..., None] * e
            cols.append((self.jacobian(y + hm) - self.jacobian(y - hm))
                        / (2.0 * h[..., None, None, None]))
        return np.stack(cols, axis=-1)

    def drift_vector(self, y):
        """Convenience for drift-style fields (d_in == 1): (..., d_out)."""
        return self.evaluate(y)[..., 0]


@dataclass
class ControlledSolution:
    """Grid trace with its Gubinelli derivatives against a reference lift.

    trace: (..., n, d_out); gub1: (..., n, d_out, e); gub2 present on
    level-3 drivers.  Leading axes are Monte-Carlo batches.
    """

    grid: np.ndarray
    trace: np.ndarray
    gub1: np.ndarray
    gub2: np.ndarray | None = None
    driver_ref: object = None
    meta: dict = field(default_factory=dict)

    @property
    def n_points(self):
        return self.trace.shape[-2]


def _lift_arrays(lift):
    """(lvl1, lvl2, lvl3) with a leading batch axis, from LiftedPath or
    LiftBatch."""
    lvl1, lvl2, lvl3 = lift.lvl1, lift.lvl2, lift.lvl3
    if lvl1.ndim == 2:
        lvl1 = lvl1[None]
        lvl2 = lvl2[None]
        lvl3 = lvl3[None] if lvl3 is not None else None
    return lvl1, lvl2, lvl3


def _g2(sig, jac):
    # G2[..., i, k, j] = sum_m d(sigma^i_j)/dy^m sigma^m_k
    return np.einsum("...ijm,...mk->...ikj", jac, sig)


def _g3(sig, jac, hess):
    # G3[..., i, l, k, j] = sum_n d_n(G2[i, k, j]) sigma^n_l
    t1 = np.einsum("...ijmn,...mk,...nl->...ilkj", hess, sig, sig)
    t2 = np.einsum("...ijm,...mkn,...nl->...ilkj", jac, jac, sig)
    return t1 + t2


def solve_rde(lift, sigma: VectorField, y0, blowup: float = 1e8,
              keep_gub2: bool | None = None) -> ControlledSolution:
    """Explicit Davie-type solve of dZ = sigma(Z) d(lift) from y0.

    ``y0`` may carry a leading batch axis matching a LiftBatch driver.
    """
    lvl1, lvl2, lvl3 = _lift_arrays(lift)
    M, n_int, e = lvl1.shape
    if e != sigma.d_in:
        raise ValueError("driver dimension does not match the vector field")
    y0 = np.asarray(y0, dtype=float)
    batch = y0.ndim == 2 or M > 1
    if y0.ndim == 1:
        y0 = np.broadcast_to(y0, (M, sigma.d_out)).copy()
    if y0.shape[0] != M:
        if M == 1:
            lvl1 = np.broadcast_to(lvl1, (y0.shape[0], n_int, e))
            lvl2 = np.broadcast_to(lvl2, (y0.shape[0],) + lvl2.shape[1:])
            if lvl3 is not None:
                lvl3 = np.broadcast_to(lvl3, (y0.shape[0],) + lvl3.shape[1:])
            M = y0.shape[0]
        else:
            raise ValueError("batch sizes of y0 and driver disagree")
    level3 = lvl3 is not None
    if keep_gub2 is None:
        keep_gub2 = level3
    d = sigma.d_out
    trace = np.empty((M, n_int + 1, d))
    gub1 = np.empty((M, n_int + 1, d, e))
    gub2 = np.empty((M, n_int + 1, d, e, e)) if keep_gub2 else None
    y = y0.copy()
    for k in range(n_int + 1):
        sig = sigma.evaluate(y)
        jac = sigma.jacobian(y)
        g2 = _g2(sig, jac)
        trace[:, k] = y
        gub1[:, k] = sig
        if keep_gub2:
            gub2[:, k] = g2
        if k == n_int:
            break
        incr = (np.einsum("...ij,...j->...i", sig, lvl1[:, k])
                + np.einsum("...ikj,...kj->...i", g2, lvl2[:, k]))
        if level3:
            hess = sigma.hessian(y)
            g3 = _g3(sig, jac, hess)
            incr = incr + np.einsum("...ilkj,...lkj->...i", g3, lvl3[:, k])
        y = y + incr
        bad = ~np.isfinite(y).all(axis=-1) | (np.abs(y).max(axis=-1) > blowup)
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise BlowUpError(k + 1, lift.grid[k + 1],
                              float(np.abs(y[idx]).max()))
    if not batch:
        trace, gub1 = trace[0], gub1[0]
        gub2 = gub2[0] if gub2 is not None else None
    return ControlledSolution(grid=lift.grid, trace=trace, gub1=gub1, gub2=gub2,
                              driver_ref=lift)


def solve_rde_volterra(lift, sigma: VectorField, b: VectorField, kernel, z0,
                       picard_iters: int = 0, blowup: float = 1e8,
                       panel_weights=None, prefix_states=None,
                       start_index: int = 0) -> ControlledSolution:
    """Solve dZ = d[K b(Z)] + sigma(Z) d(lift): rough steps plus the memory
    drift K b(Z)(t) accumulated with panel-integrated kernel weights and
    left-point drift values.

    ``prefix_states`` restarts the solve from ``start_index`` with the drift
    history of an earlier solution carried along.
    """
    lvl1, lvl2, lvl3 = _lift_arrays(lift)
    M, n_int, e = lvl1.shape
    level3 = lvl3 is not None
    grid = lift.grid
    if panel_weights is None:
        panel_weights = kernel.panel_weights(grid)
    W = panel_weights
    z0 = np.asarray(z0, dtype=float)
    batch = z0.ndim == 2 or M > 1
    if z0.ndim == 1:
        z0 = np.broadcast_to(z0, (M, sigma.d_out)).copy()
    M = max(M, z0.shape[0])
    d = sigma.d_out
    trace = np.empty((M, n_int + 1, d))
    gub1 = np.empty((M, n_int + 1, d, e))
    gub2 = np.empty((M, n_int + 1, d, e, e)) if level3 else None
    bvals = np.zeros((M, n_int + 1, d))
    if prefix_states is not None:
        ps = np.asarray(prefix_states, dtype=float)
        if ps.ndim == 2:
            ps = np.broadcast_to(ps, (M,) + ps.shape)
        trace[:, : start_index + 1] = ps
        for j in range(start_index + 1):
            bvals[:, j] = b.drift_vector(trace[:, j])
            sig = sigma.evaluate(trace[:, j])
            gub1[:, j] = sig
            if level3:
                gub2[:, j] = _g2(sig, sigma.jacobian(trace[:, j]))
        y = trace[:, start_index].copy()
    else:
        if start_index != 0:
            raise ValueError("start_index needs prefix_states")
        y = z0.copy()
    for k in range(start_index, n_int + 1):
        sig = sigma.evaluate(y)
        jac = sigma.jacobian(y)
        g2 = _g2(sig, jac)
        trace[:, k] = y
        gub1[:, k] = sig
        bvals[:, k] = b.drift_vector(y)
        if level3:
            gub2[:, k] = g2
        if k == n_int:
            break
        rough = (np.einsum("...ij,...j->...i", sig, lvl1[:, k])
                 + np.einsum("...ikj,...kj->...i", g2, lvl2[:, k]))
        if level3:
            g3 = _g3(sig, jac, sigma.hessian(y))
            rough = rough + np.einsum("...ilkj,...lkj->...i", g3, lvl3[:, k])
        # memory drift: history panels re-weighted plus the new panel
        wdiff = W[k + 1, :k] - W[k, :k]
        hist = np.einsum("j,mjd->md", wdiff, bvals[:, :k]) if k > 0 else 0.0
        new_panel = W[k + 1, k] * bvals[:, k]
        y_next = y + rough + hist + new_panel
        for _ in range(picard_iters):
            mid = 0.5 * (y + y_next)
            y_next = y + rough + hist + W[k + 1, k] * b.drift_vector(mid)
        y = y_next
        bad = ~np.isfinite(y).all(axis=-1) | (np.abs(y).max(axis=-1) > blowup)
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise BlowUpError(k + 1, grid[k + 1], float(np.abs(y[idx]).max()))
    if not batch:
        trace, gub1 = trace[0], gub1[0]
        gub2 = gub2[0] if gub2 is not None else None
    return ControlledSolution(grid=grid, trace=trace, gub1=gub1, gub2=gub2,
                              driver_ref=lift, meta={"kernel": kernel})


def rough_integral(Z: ControlledSolution, lift, interval=None):
    """Compensated-sum rough integral of a controlled integrand against the
    lift: sum over steps of trace . lvl1 + gub1 : lvl2 (+ gub2 : lvl3).

    The integrand's last trace axis must match the lift dimension (scalar
    pairing).  A (..., n, m, e) trace yields an (..., m) vector.
    Returns the value over ``interval`` = (i0, i1) grid indices (defaults to
    the whole grid).
    """
    lvl1, lvl2, lvl3 = _lift_arrays(lift)
    M, n_int, e = lvl1.shape
    trace = Z.trace if Z.trace.ndim >= 3 else Z.trace[None]
    gub1 = Z.gub1 if Z.gub1.ndim >= 4 else Z.gub1[None]
    single_path = Z.trace.ndim < 3
    if trace.shape[-1] != e:
        raise ValueError("integrand is not aligned with the driver "
                         f"(got {trace.shape[-1]} columns, lift has {e})")
    if trace.shape[1] != n_int + 1:
        raise ValueError("integrand grid does not match the lift grid")
    i0, i1 = (0, n_int) if interval is None else interval
    if not (0 <= i0 <= i1 <= n_int):
        raise ValueError("interval outside grid")
    sl = slice(i0, i1)
    if trace.ndim == 3:  # (M, n, e) scalar integrand
        out = (np.einsum("mne,mne->m", trace[:, sl], lvl1[:, sl])
               + np.einsum("mnke,mnek->m", gub1[:, sl], lvl2[:, sl]))
        if lvl3 is not None and Z.gub2 is not None:
            gub2 = Z.gub2 if Z.gub2.ndim >= 4 else Z.gub2[None]
            out = out + np.einsum("mnkcd,mncdk->m", gub2[:, sl], lvl3[:, sl])
    else:  # (M, n, m_out, e)
        out = (np.einsum("mnoe,mne->mo", trace[:, sl], lvl1[:, sl])
               + np.einsum("mnoke,mnek->mo", gub1[:, sl], lvl2[:, sl]))
        if lvl3 is not None and Z.gub2 is not None:
            gub2 = Z.gub2 if Z.gub2.ndim >= 5 else Z.gub2[None]
            out = out + np.einsum("mnokcd,mncdk->mo", gub2[:, sl], lvl3[:, sl])
    return out[0] if single_path else out


def rough_integral_path(Z: ControlledSolution, lift):
    """Cumulative rough integral at every grid point (batched)."""
    lvl1, lvl2, lvl3 = _lift_arrays(lift)
    trace = Z.trace if Z.trace.ndim >= 3 else Z.trace[None]
    gub1 = Z.gub1 if Z.gub1.ndim >= 4 else Z.gub1[None]
    single_path = Z.trace.ndim < 3
    steps = (np.einsum("mne,mne->mn", trace[:, :-1], lvl1)
             + np.einsum("mnke,mnek->mn", gub1[:, :-1], lvl2))
    if lvl3 is not None and Z.gub2 is not None:
        gub2 = Z.gub2 if Z.gub2.ndim >= 5 else Z.gub2[None]
        steps = steps + np.einsum("mnkcd,mncdk->mn", gub2[:, :-1], lvl3)
    out = np.concatenate([np.zeros((steps.shape[0], 1)), np.cumsum(steps, axis=1)], axis=1)
    return out[0] if single_path else out


def solve_jacobian(lift, sigma: VectorField, Z: ControlledSolution,
                   blowup: float = 1e12) -> ControlledSolution:
    """Jacobian of the flow: dJ = grad sigma(Z) J d(lift), J_0 = identity,
    solved through the augmented state (Z, J) so the same stepper applies."""
    d = sigma.d_out
    e = sigma.d_in

    def aug_eval(u):
        y = u[..., :d]
        J = u[..., d:].reshape(u.shape[:-1] + (d, d))
        S = sigma.evaluate(y)
        G = sigma.jacobian(y)  # (..., d, e, d)
        FJ = np.einsum("...ajm,...mb->...abj", G, J)
        return np.concatenate([S, FJ.reshape(u.shape[:-1] + (d * d, e))], axis=-2)

    def aug_jac(u):
        y = u[..., :d]
        J = u[..., d:].reshape(u.shape[:-1] + (d, d))
        G = sigma.jacobian(y)
        Hs = sigma.hessian(y)  # (..., d, e, d, d)
        lead = u.shape[:-1]
        out = np.zeros(lead + (d + d * d, e, d + d * d))
        out[..., :d, :, :d] = G
        dy = np.einsum("...ajmn,...mb->...abjn", Hs, J).reshape(lead + (d * d, e, d))
        out[..., d:, :, :d] = dy
        # d F_{(a,b),j} / d J_{(m,c)} = G[a, j, m] delta_{bc}
        dJ = np.zeros(lead + (d, d, e, d, d))
        for b_ix in range(d):
            dJ[..., :, b_ix, :, :, b_ix] = G
        out[..., d:, :, d:] = dJ.reshape(lead + (d * d, e, d * d))
        return out

    aug = VectorField(fn=aug_eval, jac=aug_jac, hess=None, d_state=d + d * d,
                      d_out=d + d * d, d_in=e, name=f"jacobian[{sigma.name}]")
    if Z.trace.ndim == 3:
        y0 = np.concatenate([Z.trace[:, 0], np.broadcast_to(
            np.eye(d).ravel(), (Z.trace.shape[0], d * d))], axis=-1)
    else:
        y0 = np.concatenate([Z.trace[0], np.eye(d).ravel()])
    sol = solve_rde(lift, aug, y0, blowup=blowup)
    tr = sol.trace
    if tr.ndim == 3:
        J = tr[..., d:].reshape(tr.shape[0], tr.shape[1], d, d)
        g1 = sol.gub1[..., d:, :].reshape(tr.shape[0], tr.shape[1], d, d, e)
    else:
        J = tr[..., d:].reshape(tr.shape[0], d, d)
        g1 = sol.gub1[..., d:, :].reshape(tr.shape[0], d, d, e)
    return ControlledSolution(grid=lift.grid, trace=J.reshape(tr.shape[:-1] + (d * d,)),
                              gub1=g1.reshape(tr.shape[:-1] + (d * d, e)),
                              driver_ref=lift, meta={"matrix_shape": (d, d)})


def compose_observation_functional(b_field: VectorField, Z: ControlledSolution,
                                   e_full: int, target_cols, state_cols=None):
    """Controlled integrand L with components b^j placed on ``target_cols``
    of a larger driver, derivatives propagated through Z's Gubinelli data.

    Z is controlled by the first len(state driver) columns of the full lift
    (or ``state_cols`` when given).  Returns a ControlledSolution whose
    trace is (..., n, e_full), suitable for :func:`rough_integral`.
    """
    target_cols = list(target_cols)
    single = Z.trace.ndim == 2
    trace = Z.trace[None] if single else Z.trace
    zg1 = Z.gub1[None] if single else Z.gub1
    M, n, d = trace.shape
    e_sub = zg1.shape[-1]
    if state_cols is None:
        state_cols = list(range(e_sub))
    bv = b_field.evaluate(trace)[..., 0]          # (M, n, n_obs)
    bj = b_field.jacobian(trace)[..., 0, :]       # (M, n, n_obs, d_state)
    L = np.zeros((M, n, e_full))
    G1 = np.zeros((M, n, e_full, e_full))
    n_obs = bv.shape[-1]
    dsub = np.einsum("mnod,mndc->mnoc", bj, zg1)  # (M, n, n_obs, e_sub)
    for j, col in enumerate(target_cols):
        L[..., col] = bv[..., j]
        for c_local, c_full in enumerate(state_cols):
            G1[..., col, c_full] = dsub[..., j, c_local]
    G2 = None
    if Z.gub2 is not None:
        zg2 = Z.gub2[None] if single else Z.gub2
        bh = b_field.hessian(trace)[..., 0, :, :]  # (M, n, n_obs, d, d)
        first = np.einsum("mnod,mndcf->mnocf", bj, zg2)
        second = np.einsum("mnoab,mnac,mnbf->mnocf", bh, zg1, zg1)
        G2 = np.zeros((M, n, e_full, e_full, e_full))
        dd = first + second
        for j, col in enumerate(target_cols):
            for c1l, c1 in enumerate(state_cols):
                for c2l, c2 in enumerate(state_cols):
                    G2[..., col, c1, c2] = dd[..., j, c1l, c2l]
    if single:
        L, G1 = L[0], G1[0]
        G2 = G2[0] if G2 is not None else None
    return ControlledSolution(grid=Z.grid, trace=L, gub1=G1, gub2=G2,
                              driver_ref=None)


def export_solution_csv(sol: ControlledSolution, path, jacobian=None):
    """CSV rows: time, state components (and optional Jacobian entries)."""
    import csv

    tr = sol.trace if sol.trace.ndim == 2 else sol.trace[0]
    jr = None
    if jacobian is not None:
        jr = jacobian.trace if jacobian.trace.ndim == 2 else jacobian.trace[0]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        head = ["time"] + [f"z_{i + 1}" for i in range(tr.shape[1])]
        if jr is not None:
            head += [f"J_{i + 1}" for i in range(jr.shape[1])]
        wr.writerow(head)
        for k, t in enumerate(sol.grid):
            row = [repr(float(t))] + [repr(float(v)) for v in tr[k]]
            if jr is not None:
                row += [repr(float(v)) for v in jr[k]]
            wr.writerow(row)
    return path
