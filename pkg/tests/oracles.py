"""Independent numerical oracles shared by the test suite.

Everything here avoids the library's own algebra/solver code paths:
signatures come from quadrature of the defining iterated integrals,
filters from the Kalman-Bucy ODE, SDE laws from Euler-Maruyama.
"""

import numpy as np


def signature_riemann(points, level=3, subdiv=16):
    """Signature of the polyline through ``points`` by quadrature of the
    iterated integrals.  Trapezoid (level 2) and Simpson (level 3) rules are
    exact on straight pieces, so the result is exact for polylines up to
    rounding.
    """
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    # refine each segment
    ref = [points[0]]
    for a, b in zip(points[:-1], points[1:]):
        for m in range(1, subdiv + 1):
            ref.append(a + (b - a) * m / subdiv)
    X = np.asarray(ref)
    X0 = X[0]
    S1 = X[-1] - X0
    S2 = np.zeros((d, d))
    S3 = np.zeros((d, d, d))
    run2 = np.zeros((d, d))
    for k in range(len(X) - 1):
        dx = X[k + 1] - X[k]
        a = X[k] - X0
        b = X[k + 1] - X0
        mid = 0.5 * (a + b)
        # running level-2 at the midpoint and right end (trapezoid, exact)
        run2_mid = run2 + 0.5 * np.outer(a + mid, dx / 2.0)
        run2_next = run2 + 0.5 * np.outer(a + b, dx)
        if level == 3:
            simpson2 = (run2 + 4.0 * run2_mid + run2_next) / 6.0
            S3 += np.einsum("ij,k->ijk", simpson2, dx)
        S2 += 0.5 * np.outer(a + b, dx)
        run2 = run2_next
    return S1, S2, (S3 if level == 3 else None)


def kalman_bucy(times, y, sigma, beta, m0, p0, substeps=8):
    """Kalman-Bucy filter for dX = sigma dB, dY = beta X dt + dW:
    dm = P beta (dY - beta m dt),  dP/dt = sigma^2 - beta^2 P^2.
    Returns (m_path, P_path) on ``times``.
    """
    times = np.asarray(times, dtype=float)
    y = np.asarray(y, dtype=float)
    m = np.empty_like(times)
    p = np.empty_like(times)
    m[0], p[0] = m0, p0
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        dy = y[k + 1] - y[k]
        mc, pc = m[k], p[k]
        h = dt / substeps
        for _ in range(substeps):
            pc = pc + h * (sigma ** 2 - beta ** 2 * pc ** 2)
        mc = mc + pc * beta * (dy - beta * mc * dt)
        m[k + 1], p[k + 1] = mc, pc
    return m, p


def euler_maruyama(f, g, x0, times, dw):
    """Ito Euler scheme for dX = f(X) dt + g(X) dW on the given grid."""
    x = np.empty((len(times),) + np.shape(x0))
    x[0] = x0
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        x[k + 1] = x[k] + f(x[k]) * dt + g(x[k]) * dw[k]
    return x
