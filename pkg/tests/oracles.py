"""Independent reference computations used by the tests.

Nothing here calls the spectral machinery of the package: matrices are built
entry by entry and exponentials come from ``scipy.linalg.expm``.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.stats


def dense_a(n: int) -> np.ndarray:
    a = np.zeros((n, n))
    for k in range(n):
        a[k, k] = -2.0
        if k > 0:
            a[k, k - 1] = 1.0
        if k < n - 1:
            a[k, k + 1] = 1.0
    a[0, 0] = a[n - 1, n - 1] = -1.0
    return a * n**2 / np.pi**2


def nodes(n: int) -> np.ndarray:
    return np.array([(2 * k - 1) * np.pi / (2 * n) for k in range(1, n + 1)])


def interp_weights(n: int, x: float) -> np.ndarray:
    xs = nodes(n)
    w = np.zeros(n)
    if x <= xs[0]:
        w[0] = 1.0
    elif x >= xs[-1]:
        w[-1] = 1.0
    else:
        k = max(i for i in range(n) if xs[i] <= x)
        s = (x - xs[k]) / (xs[k + 1] - xs[k])
        w[k], w[k + 1] = 1.0 - s, s
    return w


def step_matrices(n: int, dt: float):
    """``exp(-A^2 dt)`` and ``int_0^dt exp(-A^2 s) ds`` via an augmented exponential."""
    M = dense_a(n) @ dense_a(n)
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = -M * dt
    big[:n, n:] = np.eye(n) * dt
    ex = scipy.linalg.expm(big)
    return ex[:n, :n], ex[:n, n:]


def dense_lq_gramian(n: int, m: int, T: float, xbar: float) -> float:
    """Linear case, time-stepped: min 1/2||h||^2 s.t. value at (T, xbar) = y is y^2/(2v).

    Builds the control-to-terminal map ``a`` row by row, then ``v = |a|^2 / w``
    with ``w = dt pi / n`` the quadrature weight of the control norm.
    """
    dt = T / m
    E, K = step_matrices(n, dt)
    wx = interp_weights(n, xbar)
    rows = []
    prop = wx.copy()
    for _ in range(m):
        rows.append(prop @ K)
        prop = prop @ E
    a = np.concatenate(rows)
    wq = dt * np.pi / n
    return float(a @ a / wq)


def dense_lq_min_norm(n: int, m: int, T: float, xbar: float, y: float) -> float:
    """Same linear-quadratic problem solved by least squares (min-norm solution)."""
    dt = T / m
    E, K = step_matrices(n, dt)
    wx = interp_weights(n, xbar)
    cols = []
    prop = wx.copy()
    for _ in range(m):
        cols.append(prop @ K)
        prop = prop @ E
    a = np.concatenate(cols[::-1])[None, :]
    h, *_ = np.linalg.lstsq(a, np.array([y]), rcond=None)
    return 0.5 * dt * np.pi / n * float(h @ h)


def gaussian_tail(y: float, var: float) -> float:
    return float(scipy.stats.norm.sf(y / np.sqrt(var)))
