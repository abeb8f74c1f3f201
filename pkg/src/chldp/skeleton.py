"""Discrete skeleton equation: forward map, exact control inversion and the rate functional.

A control lives in ``N_n``: piecewise constant on the cells ``[(k-1)h, kh)``
and on the time slabs ``[t_j, t_{j+1})``.  The forward map integrates

    f' = -A_n^2 f + A_n b(f) + sigma(f) h

on the nodes, with the exponential scheme of :mod:`chldp.timestep`.  The
inverse recovers ``h`` slab by slab from two consecutive slices, so the two
maps are inverse to each other up to the implicit-solve tolerance.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .discrete_space import SpatialGrid, apply_A, interpolate_pn, lnorm
from .model import SIGMA_MIN, Coefficients
from .timestep import StepOperators, implicit_step, recover_forcing

TERMINAL_TOL = 1e-10


class NondegeneracyError(ValueError):
    """``|sigma|`` fell below the floor along a path, so the inversion is undefined."""


@dataclass
class Control:
    """Cell values ``h[j, k]`` on ``[t_j, t_{j+1}) x [(k-1)pi/n, k pi/n)``."""

    values: np.ndarray
    T: float

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def dt(self) -> float:
        return self.T / self.m

    def norm2(self) -> float:
        """Squared L^2(O_T) norm."""
        return float(self.dt * np.pi / self.n * np.sum(self.values**2))

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def to_q(self) -> np.ndarray:
        """theta^{-1}: the R^n-valued time series behind this control."""
        return np.sqrt(np.pi / self.n) * self.values

    def scaled(self, factor: float) -> "Control":
        return Control(self.values * factor, self.T)

    @classmethod
    def zeros(cls, n: int, m: int, T: float) -> "Control":
        return cls(np.zeros((m, n)), T)


@dataclass
class SpaceTimePath:
    """Nodal values ``f[j, k] = f(t_j, x_k)`` for ``j = 0..m``."""

    values: np.ndarray
    T: float

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))

    @property
    def m(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def dt(self) -> float:
        return self.T / self.m

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.m + 1)

    def field(self, x, j: Optional[int] = None) -> np.ndarray:
        """Pi_n interpolation of slice ``j`` (all slices when ``None``) at ``x``."""
        vals = self.values if j is None else self.values[j]
        return interpolate_pn(vals, x)

    def terminal_value(self, xbar: float) -> float:
        return float(SpatialGrid(self.n).interp_weights(xbar) @ self.values[-1])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def lift_control(q: np.ndarray, T: float) -> Control:
    """theta: ``h = sqrt(n/pi) q_k`` on cell ``k``."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    return Control(np.sqrt(q.shape[1] / np.pi) * q, T)


def q_norm2(q: np.ndarray, T: float) -> float:
    """``int_0^T |q(t)|^2 dt`` for a piecewise-constant series."""
    q = np.atleast_2d(q)
    return float(T / q.shape[0] * np.sum(q**2))


def average_control(h_fine: np.ndarray, n: int, T: float) -> Control:
    """h-tilde: cell averages of a control sampled on a spatial refinement.

    ``h_fine`` has shape ``(m, N)`` with ``N`` a multiple of ``n``; column ``i``
    is the value on the fine cell ``[i pi/N, (i+1) pi/N)``.
    """
    h_fine = np.atleast_2d(np.asarray(h_fine, dtype=float))
    m, big = h_fine.shape
    if big % n:
        raise ValueError(f"fine grid with {big} cells does not refine {n} cells")
    return Control(h_fine.reshape(m, n, big // n).mean(axis=2), T)


def _cell_forcing(h) -> tuple[np.ndarray, float]:
    """Per-node control values from a Control or a finer cell grid."""
    if isinstance(h, Control):
        return h.values, h.T
    raise TypeError("expected a Control")


def skeleton_forward(coeffs: Coefficients, h, n: Optional[int] = None) -> SpaceTimePath:
    """Upsilon^n: solve the discrete skeleton equation driven by ``h``.

    ``h`` is a :class:`Control`, either on ``n`` cells or on a refinement of
    them (``n`` must then be given).  On a refinement the node forcing is
    ``(n/pi) * integral of h over the cell``, accumulated from the fine cells.
    """
    vals, T = _cell_forcing(h)
    m, ncols = vals.shape
    n = ncols if n is None else int(n)
    if ncols != n:
        if ncols % n:
            raise ValueError(f"control on {ncols} cells does not refine {n} cells")
        r = ncols // n
        fine_w = np.pi / ncols
        vals = (n / np.pi) * fine_w * vals.reshape(m, n, r).sum(axis=2)
    grid = SpatialGrid(n)
    ops = StepOperators(n, T / m)
    out = np.empty((m + 1, n))
    out[0] = coeffs.u0(grid.nodes)
    for j in range(m):
        forcing = coeffs.sigma(out[j]) * vals[j] * ops.dt
        out[j + 1] = implicit_step(ops, coeffs, out[j], forcing)
    return SpaceTimePath(out, T)


def deterministic_path(coeffs: Coefficients, n: int, m: int, T: float) -> SpaceTimePath:
    return skeleton_forward(coeffs, Control.zeros(n, m, T))


def check_initial_slice(coeffs: Coefficients, path: SpaceTimePath, tol: float = 1e-12) -> bool:
    u0 = coeffs.u0(SpatialGrid(path.n).nodes)
    return bool(np.max(np.abs(path.values[0] - u0)) <= tol * (1.0 + np.max(np.abs(u0))))


def skeleton_inverse(coeffs: Coefficients, path: SpaceTimePath,
                     sigma_min: float = SIGMA_MIN, check_initial: bool = True) -> Control:
    """Recover the unique control in ``N_n`` whose skeleton solution is ``path``."""
    if check_initial and not check_initial_slice(coeffs, path):
        raise ValueError("path does not start from the sampled initial datum")
    f = path.values
    s = coeffs.sigma(f[:-1])
    if np.min(np.abs(s)) < sigma_min:
        raise NondegeneracyError(
            f"min |sigma| = {np.min(np.abs(s)):.3e} along the path is below {sigma_min:g}")
    ops = StepOperators(path.n, path.dt)
    rate = recover_forcing(ops, coeffs, f[:-1], f[1:])
    return Control(rate / s, path.T)


def rate_functional(coeffs: Coefficients, path: SpaceTimePath, y: float, xbar: float,
                    sigma_min: float = SIGMA_MIN) -> float:
    """J^n_y(f): half the squared control norm, or inf off the constraint set."""
    if not 0.0 <= xbar <= np.pi:
        raise ValueError("xbar must lie in [0, pi]")
    if not check_initial_slice(coeffs, path):
        return np.inf
    if abs(path.terminal_value(xbar) - y) > TERMINAL_TOL:
        return np.inf
    return 0.5 * skeleton_inverse(coeffs, path, sigma_min).norm2()


# -- controls from functions ------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)


def control_from_function(fn: Callable, n: int, m: int, T: float) -> Control:
    """Cell averages in x of ``fn(t, x)`` at the slab midpoints in t."""
    edges = np.arange(n + 1) * np.pi / n
    half = np.pi / (2 * n)
    centers = 0.5 * (edges[:-1] + edges[1:])
    xq = centers[:, None] + half * _GL_X[None, :]
    t = (np.arange(m) + 0.5) * T / m
    vals = fn(t[:, None, None], xq[None, :, :])
    vals = np.broadcast_to(vals, (m, n, _GL_X.size))
    return Control(0.5 * vals @ _GL_W, T)


def function_norm2(fn: Callable, T: float, nt: int = 256, nx: int = 256) -> float:
    """Squared L^2(O_T) norm of ``fn`` by tensor Gauss-Legendre quadrature."""
    tx, tw = np.polynomial.legendre.leggauss(nt)
    xx, xw = np.polynomial.legendre.leggauss(nx)
    t = 0.5 * T * (tx + 1.0)
    x = 0.5 * np.pi * (xx + 1.0)
    v = np.broadcast_to(fn(t[:, None], x[None, :]), (nt, nx))
    return float(0.25 * T * np.pi * tw @ (v**2) @ xw)


# -- diagnostics --------------------------------------------------------------------

@dataclass
class BoundednessRow:
    n: int
    sup_linf: float
    int_A2: float
    control_norm: float


def boundedness_profile(coeffs: Coefficients, fn: Callable, n_list: Sequence[int],
                        m: int, T: float) -> list:
    """sup_t ||f||_inf and int ||A_n f||^2 dt for f = Upsilon^n(h-tilde) across n."""
    rows = []
    for n in n_list:
        h = control_from_function(fn, n, m, T)
        f = skeleton_forward(coeffs, h)
        a2 = lnorm(apply_A(f.values), 2) ** 2
        # trapezoid in time
        int_a2 = float(f.dt * (a2.sum() - 0.5 * (a2[0] + a2[-1])))
        rows.append(BoundednessRow(n, f.sup_norm(), int_a2, h.norm()))
    return rows


def holder_modulus(path: SpaceTimePath, n_pairs: int = 2000, exponent: float = 0.37,
                   seed: int = 0) -> float:
    """Largest ratio |f(t,x) - f(s,y)| / (|x-y| + |t-s|^exponent) over random pairs."""
    rng = np.random.default_rng(seed)
    times = path.times
    ji = rng.integers(0, path.m + 1, size=(n_pairs, 2))
    xs = rng.uniform(0.0, np.pi, size=(n_pairs, 2))
    grid = SpatialGrid(path.n)
    v = np.array([
        [np.interp(xs[p, c], grid.nodes, path.values[ji[p, c]]) for c in range(2)]
        for p in range(n_pairs)
    ])
    num = np.abs(v[:, 0] - v[:, 1])
    den = np.abs(xs[:, 0] - xs[:, 1]) + np.abs(times[ji[:, 0]] - times[ji[:, 1]]) ** exponent
    ok = den > 1e-12
    return float(np.max(num[ok] / den[ok]))


def refinement_errors(coeffs: Coefficients, fn: Callable, n_list: Sequence[int], m: int,
                      T: float, n_ref: int = 256, n_x: int = 2049) -> np.ndarray:
    """``||Upsilon^n(h) - Upsilon^{n_ref}(h)||_C`` on a fine x grid, same time grid."""
    x = np.linspace(0.0, np.pi, n_x)
    ref = skeleton_forward(coeffs, control_from_function(fn, n_ref, m, T))
    ref_field = ref.field(x)
    errs = []
    for n in n_list:
        f = skeleton_forward(coeffs, control_from_function(fn, n, m, T))
        errs.append(float(np.max(np.abs(f.field(x) - ref_field))))
    return np.array(errs)


def loglog_slope(n_list: Sequence[float], values: Sequence[float]) -> float:
    return float(np.polyfit(np.log(np.asarray(n_list, float)), np.log(np.asarray(values)), 1)[0])


# -- serialization -------------------------------------------------------------------

def to_csv_rows(obj, kind: str = "node") -> str:
    """CSV text ``t,index,value``; paths use slice times, controls slab start times."""
    vals = obj.values
    if isinstance(obj, SpaceTimePath):
        times = obj.times
    else:
        times = np.arange(obj.m) * obj.dt
    buf = io.StringIO()
    buf.write(f"t,{kind},value\n")
    for j, t in enumerate(times):
        for k, v in enumerate(vals[j]):
            buf.write(f"{t:.12g},{k + 1},{v:.17g}\n")
    return buf.getvalue()


def save_binary(path_or_file, obj) -> None:
    """Compact container with header {n, m, T, kind}."""
    kind = "path" if isinstance(obj, SpaceTimePath) else "control"
    np.savez(path_or_file, values=obj.values, n=obj.n, m=obj.m, T=obj.T, kind=kind)


def load_binary(path_or_file):
    with np.load(path_or_file) as data:
        kind = str(data["kind"])
        cls = SpaceTimePath if kind == "path" else Control
        obj = cls(data["values"], float(data["T"]))
        n, m = int(data["n"]), int(data["m"])
    if obj.n != n or obj.m != m:
        raise ValueError("header does not match payload")
    return obj
