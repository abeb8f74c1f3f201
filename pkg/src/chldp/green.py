"""Discrete and continuous Green functions of ``d/dt + Delta^2`` with Neumann conditions.

The discrete kernel is ``G^n_t(x, y) = sum_j exp(-lambda_j^2 t) Pi_n(phi_j)(x) phi_j(kappa_n(y))``
and the continuous one is the cosine series truncated at ``J``.  The error
study integrates ``|G^n - G|^2`` semi-analytically and ``|Delta_n G^n - Delta G|``
by composite Gauss-Legendre quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discrete_space import SpatialGrid, eigenvalues, phi_cos

_GL4_X, _GL4_W = np.polynomial.legendre.leggauss(4)


@dataclass
class DiscreteGreen:
    n: int
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.grid = SpatialGrid(self.n)
        self.lam = eigenvalues(self.n)
        self.j = np.arange(self.n)

    def phi_n(self, x) -> np.ndarray:
        """``Pi_n(phi_j)(x)`` for all j; shape ``x.shape + (n,)``."""
        x = np.asarray(x, dtype=float)
        samples = phi_cos(self.j[None, :], self.grid.nodes[:, None])  # (k, j)
        out = np.stack([np.interp(x, self.grid.nodes, samples[:, j]) for j in self.j], axis=-1)
        return out

    def phi_kappa(self, y) -> np.ndarray:
        return phi_cos(self.j, self.grid.project(np.asarray(y, dtype=float))[..., None])

    def _decay(self, t) -> np.ndarray:
        key = float(t)
        if key not in self._cache:
            if t < 0:
                raise ValueError("t must be nonnegative")
            self._cache[key] = np.exp(-self.lam**2 * t)
        return self._cache[key]

    def __call__(self, t: float, x, y) -> np.ndarray:
        return np.sum(self._decay(t) * self.phi_n(x) * self.phi_kappa(y), axis=-1)

    def laplacian(self, t: float, x, y) -> np.ndarray:
        """``Delta_{n,y} G^n_t(x, y)``."""
        return np.sum(self.lam * self._decay(t) * self.phi_n(x) * self.phi_kappa(y), axis=-1)

    def bilaplacian(self, t: float, x, y) -> np.ndarray:
        return np.sum(self.lam**2 * self._decay(t) * self.phi_n(x) * self.phi_kappa(y), axis=-1)


@dataclass
class ContinuousGreen:
    J: int = 512

    def __post_init__(self):
        self.l = np.arange(self.J + 1)

    def __call__(self, t: float, x, y) -> np.ndarray:
        if t <= 0:
            raise ValueError("G_0 is a delta function; evaluate for t > 0")
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        return np.sum(np.exp(-self.l**4.0 * t) * phi_cos(self.l, x) * phi_cos(self.l, y), axis=-1)

    def laplacian(self, t: float, x, y) -> np.ndarray:
        if t <= 0:
            raise ValueError("G_0 is a delta function; evaluate for t > 0")
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        return np.sum(-(self.l**2.0) * np.exp(-self.l**4.0 * t)
                      * phi_cos(self.l, x) * phi_cos(self.l, y), axis=-1)

    def tail_bound(self, t: float, J2: int) -> float:
        """Bound on ``|G^(J) - G^(J2)|``: ``(2/pi) sum_{J<l<=J2} exp(-l^4 t)``."""
        l = np.arange(self.J + 1, J2 + 1, dtype=float)
        return float(2.0 / np.pi * np.sum(np.exp(-l**4 * t)))


def _time_integral(a: np.ndarray, T: float) -> np.ndarray:
    """``int_0^T exp(-a s) ds`` elementwise, stable for small ``a``."""
    a = np.asarray(a, dtype=float)
    small = a * T < 1e-12
    safe = np.where(small, 1.0, a)
    return np.where(small, T, -np.expm1(-safe * T) / safe)


def _cell_cos_integrals(n: int, l: np.ndarray) -> np.ndarray:
    """``M[k, l] = int_{cell k} phi_l(y) dy``."""
    edges = np.arange(n + 1) * np.pi / n
    lf = l.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(lf[None, :] > 0, np.sin(lf[None, :] * edges[:, None]) / lf[None, :],
                     edges[:, None])
    scale = np.where(l == 0, np.sqrt(1.0 / np.pi), np.sqrt(2.0 / np.pi))
    return (s[1:] - s[:-1]) * scale


def green_l2_error(n: int, T: float, x: float, J: int = 512) -> float:
    """``E2 = int_0^T int |G^n_s(x,y) - G_s(x,y)|^2 dy ds``, exact in s and y."""
    dg = DiscreteGreen(n)
    a = dg.phi_n(np.array(x))  # (n,)
    lam2 = dg.lam**2
    l = np.arange(J + 1)
    l4 = l.astype(float) ** 4
    b = phi_cos(l, x)
    # int (G^n)^2 dy: e_j orthonormal, so diagonal
    nn = np.sum(a**2 * _time_integral(2 * lam2, T))
    cc = np.sum(b**2 * _time_integral(2 * l4, T))
    samples = phi_cos(dg.j[None, :], dg.grid.nodes[:, None])  # (k, j)
    M = samples.T @ _cell_cos_integrals(n, l)  # (j, l)
    cross = np.sum(a[:, None] * b[None, :] * M * _time_integral(lam2[:, None] + l4[None, :], T))
    return float(nn - 2.0 * cross + cc)


def green_l2_error_bruteforce(n: int, T: float, x: float, J: int = 64,
                              n_s: int = 48, n_y_per_cell: int = 16) -> float:
    """Independent double-loop quadrature of E2 (slow; small J only)."""
    dg = DiscreteGreen(n)
    cg = ContinuousGreen(J)
    # s on a geometric ladder of Gauss-Legendre panels
    edges = np.concatenate([[0.0], np.geomspace(1e-9, T, 40)])
    sx, sw = np.polynomial.legendre.leggauss(n_s)
    yx, yw = np.polynomial.legendre.leggauss(n_y_per_cell)
    cell = np.pi / n
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        for sp, swt in zip(0.5 * (hi - lo) * (sx + 1) + lo, 0.5 * (hi - lo) * sw):
            acc = 0.0
            for k in range(n):
                y = k * cell + 0.5 * cell * (yx + 1)
                gn = dg(sp, x, y)
                gc = cg(sp, x, y)
                acc += 0.5 * cell * np.sum(yw * (gn - gc) ** 2)
            total += swt * acc
    return float(total)


def green_l1_laplacian_error(n_list, T: float, x: float, J: int = 512,
                             s_min: float = 1e-10, per_decade: int = 32,
                             n_y: int = 4096, chunk: int = 32) -> np.ndarray:
    """``E1 = int_0^T int |Delta_{n,y} G^n_s - Delta G_s| dy ds`` for each n in ``n_list``.

    The y grid has ``n_y`` panels (a multiple of every n, so cell edges are
    panel edges) with 4 Gauss points each.  In s the quadrature uses Gauss-Legendre
    panels per decade on ``[s_min, T]``; the piece ``[0, s_min]`` is estimated as
    ``2 s_min f(s_min)`` from the ``s^{-1/2}`` singularity.
    """
    n_list = [int(n) for n in n_list]
    if any(n_y % n for n in n_list):
        raise ValueError("n_y must be a multiple of every n")
    pw = np.pi / n_y
    y = (np.arange(n_y)[:, None] * pw + 0.5 * pw * (_GL4_X[None, :] + 1)).ravel()
    yw = np.tile(0.5 * pw * _GL4_W, n_y)

    decades = np.log10(T / s_min)
    n_pan = int(np.ceil(decades))
    pedges = np.geomspace(s_min, T, n_pan + 1)
    sx, sw = np.polynomial.legendre.leggauss(per_decade)
    s_nodes = np.concatenate([0.5 * (b - a) * (sx + 1) + a for a, b in zip(pedges[:-1], pedges[1:])])
    s_wts = np.concatenate([0.5 * (b - a) * sw for a, b in zip(pedges[:-1], pedges[1:])])
    s_all = np.concatenate([[s_min], s_nodes])

    l = np.arange(J + 1).astype(float)
    cont_y = -(l[:, None] ** 2) * (phi_cos(l, x)[:, None] * phi_cos(l[:, None], y[None, :]))
    dgs = [DiscreteGreen(n) for n in n_list]
    disc_y = []
    for dg in dgs:
        a = dg.phi_n(np.array(x))
        disc_y.append(dg.lam[:, None] * a[:, None] * dg.phi_kappa(y).T)

    vals = np.zeros((len(n_list), s_all.size))
    for c0 in range(0, s_all.size, chunk):
        s = s_all[c0:c0 + chunk]
        cont = np.exp(-np.outer(s, l**4)) @ cont_y
        for i, dg in enumerate(dgs):
            disc = np.exp(-np.outer(s, dg.lam**2)) @ disc_y[i]
            vals[i, c0:c0 + chunk] = np.abs(disc - cont) @ yw
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite quadrature value in the Green error study")
    return vals[:, 1:] @ s_wts + 2.0 * s_min * vals[:, 0]


@dataclass
class GreenErrorTable:
    n_list: list
    E2: np.ndarray
    E1: np.ndarray
    slope_E2: float
    slope_E1: float
    x_points: list


def green_error_study(T: float, n_list, x_points=(0.3, 0.9, 1.5, 2.1, 2.7), J: int = 512,
                      **quad) -> GreenErrorTable:
    """E2 and E1 for each n, maximized over ``x_points``, with log-log slopes."""
    n_list = [int(n) for n in n_list]
    if sorted(n_list) != n_list:
        raise ValueError("n_list must be ascending")
    e2 = np.array([[green_l2_error(n, T, x, J) for n in n_list] for x in x_points])
    e1 = np.array([green_l1_laplacian_error(n_list, T, x, J, **quad) for x in x_points])
    E2, E1 = e2.max(axis=0), e1.max(axis=0)
    if len(n_list) > 1:
        ln = np.log(n_list)
        s2 = float(np.polyfit(ln, np.log(E2), 1)[0])
        s1 = float(np.polyfit(ln, np.log(E1), 1)[0])
    else:
        s2 = s1 = float("nan")
    return GreenErrorTable(n_list, E2, E1, s2, s1, list(x_points))
