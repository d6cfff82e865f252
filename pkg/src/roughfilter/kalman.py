"""Kalman-Bucy reference filter for the linear-Gaussian benchmark
dX = sigma dB (H = 1/2), dY = beta X dt + dW, x0 ~ N(m0, P0):

    dm = beta P (dY - beta m dt),    dP/dt = sigma^2 - beta^2 P^2.

Used as the independent oracle for the Monte-Carlo filter and for the
Zakai kappa calibration.
"""

import numpy as np

__all__ = ["kalman_bucy_path"]


def kalman_bucy_path(times, y_path, sigma: float, beta: float, m0: float,
                     p0: float, substeps: int = 4):
    """Posterior mean/variance paths on the observation grid."""
    times = np.asarray(times, dtype=float)
    y = np.asarray(y_path, dtype=float)
    m = np.empty_like(times)
    p = np.empty_like(times)
    m[0], p[0] = m0, p0
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        dy = y[k + 1] - y[k]
        pc = p[k]
        h = dt / substeps
        for _ in range(substeps):
            pc += h * (sigma ** 2 - beta ** 2 * pc * pc)
        m[k + 1] = m[k] + pc * beta * (dy - beta * m[k] * dt)
        p[k + 1] = pc
    return m, p
