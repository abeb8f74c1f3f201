"""Staggered grid on [0, pi], the Neumann finite-difference Laplacian and its spectral basis.

Nodes are cell midpoints ``x_k = (2k-1) pi / (2n)``.  The matrix ``A_n`` is the
standard three-point stencil scaled by ``n^2/pi^2`` with ghost values mirrored
at both ends.  Its eigenvectors are sampled cosines, so the orthonormal
DCT-II diagonalizes every linear operator used in the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft

PHI1_TAYLOR_CUTOFF = 1e-8


@dataclass(frozen=True)
class SpatialGrid:
    n: int

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("grid needs at least one node")

    @property
    def h(self) -> float:
        return np.pi / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        k = np.arange(1, self.n + 1)
        return (2 * k - 1) * np.pi / (2 * self.n)

    @cached_property
    def cell_edges(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    def cell_index(self, x) -> np.ndarray:
        """0-based index of the cell containing ``x`` (the last cell is closed at pi)."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0) or np.any(x > np.pi):
            raise ValueError("points must lie in [0, pi]")
        return np.minimum(np.floor(x * self.n / np.pi).astype(int), self.n - 1)

    def project(self, x) -> np.ndarray:
        """kappa_n: the node of the cell containing ``x``."""
        return self.nodes[self.cell_index(x)]

    def interp_weights(self, x: float) -> np.ndarray:
        """Weights ``w`` with ``Pi_n(v)(x) = w @ v`` for every nodal vector ``v``."""
        w = np.zeros(self.n)
        if x < 0.0 or x > np.pi:
            raise ValueError("points must lie in [0, pi]")
        nodes = self.nodes
        if x <= nodes[0]:
            w[0] = 1.0
        elif x >= nodes[-1]:
            w[-1] = 1.0
        else:
            k = int(np.searchsorted(nodes, x, side="right")) - 1
            s = (x - nodes[k]) / self.h
            w[k] = 1.0 - s
            w[k + 1] = s
        return w

    def to_dict(self) -> dict:
        return {"n": self.n}


def project_kn(x, n: int) -> np.ndarray:
    return SpatialGrid(n).project(x)


def interpolate_pn(values: np.ndarray, x) -> np.ndarray:
    """Polygonal interpolation Pi_n of nodal values, constant beyond the end nodes.

    ``values`` may carry leading batch axes; the last axis is the node axis.
    """
    values = np.asarray(values, dtype=float)
    grid = SpatialGrid(values.shape[-1])
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > np.pi):
        raise ValueError("points must lie in [0, pi]")
    if values.ndim == 1:
        return np.interp(x, grid.nodes, values)
    flat = values.reshape(-1, grid.n)
    out = np.stack([np.interp(x, grid.nodes, row) for row in flat])
    return out.reshape(values.shape[:-1] + x.shape)


def interpolation_matrix(n: int, x) -> np.ndarray:
    """Matrix ``W`` with ``W @ v = Pi_n(v)(x)`` for the points ``x``."""
    grid = SpatialGrid(n)
    return np.stack([grid.interp_weights(float(xi)) for xi in np.atleast_1d(x)])


# -- the matrix A_n ---------------------------------------------------------------

def a_matrix(n: int) -> np.ndarray:
    """Dense ``A_n`` (reference implementation)."""
    if n < 2:
        raise ValueError("A_n needs n >= 2")
    a = -2.0 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)
    a[0, 0] = a[-1, -1] = -1.0
    return a * (n / np.pi) ** 2


def apply_A(v: np.ndarray) -> np.ndarray:
    """Apply ``A_n`` along the last axis with the sparse stencil."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    if n < 2:
        raise ValueError("A_n needs n >= 2")
    padded = np.concatenate([v[..., :1], v, v[..., -1:]], axis=-1)
    return (padded[..., 2:] - 2.0 * v + padded[..., :-2]) * (n / np.pi) ** 2


def discrete_laplacian(w, n: int):
    """Delta_n w as a piecewise-constant function of x.

    ``w`` is a callable on [0, pi] or a nodal vector.  The return value is a
    function of ``x`` giving ``(A_n w)`` on the cell containing ``x``.
    """
    grid = SpatialGrid(n)
    vals = np.asarray(w(grid.nodes) if callable(w) else w, dtype=float)
    aw = apply_A(vals)

    def lap(x):
        return aw[grid.cell_index(x)]

    lap.nodal = aw
    return lap


# -- spectral basis ---------------------------------------------------------------

def phi1(z) -> np.ndarray:
    """``(1 - exp(-z)) / z`` with its Taylor series near zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < PHI1_TAYLOR_CUTOFF
    safe = np.where(small, 1.0, z)
    out = np.where(small, 1.0 - z / 2.0 + z * z / 6.0, -np.expm1(-safe) / safe)
    return out


def eigenvalues(n: int) -> np.ndarray:
    j = np.arange(n)
    return -4.0 * (n / np.pi) ** 2 * np.sin(j * np.pi / (2 * n)) ** 2


def c_factors(n: int) -> np.ndarray:
    j = np.arange(n)
    arg = j * np.pi / (2 * n)
    c = np.ones(n)
    c[1:] = np.sin(arg[1:]) ** 2 / arg[1:] ** 2
    return c


def phi_cos(j, x) -> np.ndarray:
    """Neumann eigenfunctions ``phi_j`` on [0, pi], orthonormal in L^2."""
    j = np.asarray(j)
    x = np.asarray(x, dtype=float)
    scale = np.where(j == 0, np.sqrt(1.0 / np.pi), np.sqrt(2.0 / np.pi))
    return scale * np.cos(j * x)


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs of ``A_n`` and the orthonormal transforms.

    ``forward`` maps nodal values to coefficients in the ``e_j`` basis and
    ``inverse`` maps back.  Both act on the last axis.  ``fast`` switches
    between the DCT-II fast path and the dense matrix reference.
    """

    n: int
    fast: bool = True

    @cached_property
    def grid(self) -> SpatialGrid:
        return SpatialGrid(self.n)

    @cached_property
    def lam(self) -> np.ndarray:
        return eigenvalues(self.n)

    @cached_property
    def c(self) -> np.ndarray:
        return c_factors(self.n)

    @cached_property
    def matrix(self) -> np.ndarray:
        """``P[k, j] = e_j(k) = sqrt(pi/n) phi_j(x_k)``."""
        j = np.arange(self.n)
        return np.sqrt(np.pi / self.n) * phi_cos(j[None, :], self.grid.nodes[:, None])

    def forward(self, v: np.ndarray) -> np.ndarray:
        if self.fast:
            return scipy.fft.dct(np.asarray(v, dtype=float), type=2, norm="ortho", axis=-1)
        return np.asarray(v, dtype=float) @ self.matrix

    def inverse(self, coef: np.ndarray) -> np.ndarray:
        if self.fast:
            return scipy.fft.idct(np.asarray(coef, dtype=float), type=2, norm="ortho", axis=-1)
        return np.asarray(coef, dtype=float) @ self.matrix.T

    def apply_diag(self, d: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Apply the operator with eigenvalues ``d`` to nodal vectors ``v``."""
        return self.inverse(d * self.forward(v))

    def dense(self, d: np.ndarray) -> np.ndarray:
        p = self.matrix
        return (p * d) @ p.T


@lru_cache(maxsize=64)
def basis(n: int) -> SpectralBasis:
    return SpectralBasis(n)


def semigroup_apply(t: float, v: np.ndarray) -> np.ndarray:
    """``exp(-A_n^2 t) v`` computed spectrally."""
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    v = np.asarray(v, dtype=float)
    b = basis(v.shape[-1])
    return b.apply_diag(np.exp(-(b.lam**2) * t), v)


def semigroup_phi1(dt: float, v: np.ndarray) -> np.ndarray:
    """``phi1(A_n^2 dt) v`` with ``phi1(z) = (1 - e^{-z})/z``."""
    if dt < 0:
        raise ValueError("time step must be nonnegative")
    v = np.asarray(v, dtype=float)
    b = basis(v.shape[-1])
    return b.apply_diag(phi1(b.lam**2 * dt), v)


def fractional_power(nu: float, v: np.ndarray, dotted: bool = False) -> np.ndarray:
    """``(-A_n)^nu v``; the dotted version discards the zero mode and allows nu < 0."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    if not dotted and nu < 0:
        raise ValueError("negative powers need the dotted operator (A_n is singular)")
    b = basis(n)
    d = np.zeros(n)
    d[1:] = (-b.lam[1:]) ** nu
    if not dotted and nu == 0:
        d[0] = 1.0
    return b.apply_diag(d, v)


def mean_operator(v: np.ndarray) -> np.ndarray:
    return np.mean(np.asarray(v, dtype=float), axis=-1)


def lnorm(v: np.ndarray, p: float = 2.0) -> np.ndarray:
    """Discrete norm ``((pi/n) sum |v_k|^p)^(1/p)``; ``p = inf`` gives the max norm."""
    v = np.asarray(v, dtype=float)
    if np.isinf(p):
        return np.max(np.abs(v), axis=-1)
    n = v.shape[-1]
    return (np.pi / n * np.sum(np.abs(v) ** p, axis=-1)) ** (1.0 / p)


def inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Discrete L^2 inner product ``(pi/n) sum a_k b_k``."""
    a = np.asarray(a, dtype=float)
    return np.pi / a.shape[-1] * np.sum(a * b, axis=-1)
