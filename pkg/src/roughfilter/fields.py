"""Built-in vector-field families for scenarios (constant, linear,
tanh-saturated, sine), acting on the signal coordinates of a state
(x, y) and broadcast to the requested block shape.  No expression parser:
each family is a named constructor with a scale (and optional offset).
"""

import numpy as np

from .rde import VectorField

__all__ = ["make_sigma", "make_drift", "FIELD_FAMILIES"]

FIELD_FAMILIES = ("constant", "linear", "tanh", "sine")


def _coord_maps(family, scale, offset):
    if family == "constant":
        f = lambda x: np.full_like(x, scale)
        df = lambda x: np.zeros_like(x)
        d2f = lambda x: np.zeros_like(x)
    elif family == "linear":
        f = lambda x: scale * x + offset
        df = lambda x: np.full_like(x, scale)
        d2f = lambda x: np.zeros_like(x)
    elif family == "tanh":
        f = lambda x: scale * np.tanh(x) + offset
        df = lambda x: scale / np.cosh(x) ** 2
        d2f = lambda x: -2.0 * scale * np.tanh(x) / np.cosh(x) ** 2
    elif family == "sine":
        f = lambda x: scale * np.sin(x) + offset
        df = lambda x: scale * np.cos(x)
        d2f = lambda x: -scale * np.sin(x)
    else:
        raise ValueError(f"unknown field family {family!r}; "
                         f"choose one of {FIELD_FAMILIES}")
    return f, df, d2f


def make_sigma(family: str, d_x: int, d_b: int, d_state: int, scale: float = 1.0,
               offset: float = 0.0) -> VectorField:
    """Signal diffusion sigma(x, y): the (d_x, d_b) block is diagonal in the
    x coordinates, entry i = f(x_i) for i < min(d_x, d_b)."""
    f, df, d2f = _coord_maps(family, scale, offset)
    k = min(d_x, d_b)

    def fn(z):
        out = np.zeros(z.shape[:-1] + (d_x, d_b))
        for i in range(k):
            out[..., i, i] = f(z[..., i])
        return out

    def jac(z):
        out = np.zeros(z.shape[:-1] + (d_x, d_b, d_state))
        for i in range(k):
            out[..., i, i, i] = df(z[..., i])
        return out

    def hess(z):
        out = np.zeros(z.shape[:-1] + (d_x, d_b, d_state, d_state))
        for i in range(k):
            out[..., i, i, i, i] = d2f(z[..., i])
        return out

    return VectorField(fn=fn, jac=jac, hess=hess, d_state=d_state, d_out=d_x,
                       d_in=d_b, name=f"sigma[{family}]")


def make_drift(family: str, d_y: int, d_state: int, d_x: int | None = None,
               scale: float = 1.0, offset: float = 0.0) -> VectorField:
    """Observation drift b(x, y): component j = f(x_{j mod d_x}) (signal
    coordinates only)."""
    f, df, d2f = _coord_maps(family, scale, offset)
    if d_x is None:
        d_x = d_state

    def fn(z):
        out = np.zeros(z.shape[:-1] + (d_y, 1))
        for j in range(d_y):
            out[..., j, 0] = f(z[..., j % d_x])
        return out

    def jac(z):
        out = np.zeros(z.shape[:-1] + (d_y, 1, d_state))
        for j in range(d_y):
            out[..., j, 0, j % d_x] = df(z[..., j % d_x])
        return out

    def hess(z):
        out = np.zeros(z.shape[:-1] + (d_y, 1, d_state, d_state))
        for j in range(d_y):
            c = j % d_x
            out[..., j, 0, c, c] = d2f(z[..., c])
        return out

    return VectorField(fn=fn, jac=jac, hess=hess, d_state=d_state, d_out=d_y,
                       d_in=1, name=f"b[{family}]")


def zero_drift(d_y: int, d_state: int) -> VectorField:
    return make_drift("constant", d_y, d_state, scale=0.0)
