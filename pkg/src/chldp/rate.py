"""One-point rate function ``I^n(y) = inf { J^n_y(f) }`` by direct transcription.

The decision variable is the whole space-time path.  Because the control is
recovered from a path in closed form (:func:`chldp.skeleton.skeleton_inverse`),
the objective ``1/2 ||h(f)||^2`` and its gradient are explicit.

Two parameterizations are exposed:

* :class:`TranscriptionProblem` uses the raw nodal values with the heaviest
  terminal node eliminated by the constraint.  It is simple and is what the
  gradient checks exercise.
* :class:`ReducedProblem` writes ``f = f_det + L g`` with ``L`` the linear
  response of the exponential scheme, scales ``g`` so that the Hessian is the
  identity in the linear case, and removes the terminal constraint by an
  orthogonal projection.  The optimizer runs on this one.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.optimize
import scipy.signal

from .discrete_space import SpatialGrid, apply_A, phi_cos
from .model import SIGMA_MIN, Coefficients
from .skeleton import (Control, NondegeneracyError, SpaceTimePath, deterministic_path,
                       skeleton_forward, skeleton_inverse)
from .timestep import StepOperators

BARRIER = 1e12
GTOL_REL = 1e-8


# -- Gramians for the linear case b = 0, sigma = 1 ---------------------------------

def _modal_weights(n: int, xbar: float) -> np.ndarray:
    from .discrete_space import basis
    w = SpatialGrid(n).interp_weights(xbar)
    return w @ basis(n).matrix


def gramian_continuous_time(n: int, T: float, xbar: float) -> float:
    """Variance at ``(T, xbar)`` of the time-continuous linear dynamics with eps = 1.

    ``v_n(T) = (n/pi) sum_j (w . e_j)^2 int_0^T exp(-2 lambda_j^2 s) ds``.
    """
    from .discrete_space import eigenvalues
    c = _modal_weights(n, xbar)
    a = 2.0 * eigenvalues(n) ** 2
    small = a * T < 1e-14
    integral = np.where(small, T, -np.expm1(-np.where(small, 1.0, a) * T) / np.where(small, 1.0, a))
    return float(n / np.pi * np.sum(c**2 * integral))


def gramian_discrete_time(n: int, m: int, T: float, xbar: float) -> float:
    """Same variance for the time-stepped scheme with ``m`` steps."""
    ops = StepOperators(n, T / m)
    c = _modal_weights(n, xbar)
    r = np.exp(-2.0 * ops.z)
    geo = np.where(r < 1.0 - 1e-15, -np.expm1(m * np.log(np.maximum(r, 1e-300)))
                   / np.where(r < 1.0 - 1e-15, 1.0 - r, 1.0), float(m))
    geo = np.where(ops.z == 0.0, float(m), geo)
    return float(n / np.pi * np.sum(c**2 * ops.Phi**2 * ops.dt * geo))


def gramian_continuum(T: float, xbar: float, J: int = 512) -> float:
    """``sum_j phi_j(xbar)^2 int_0^T exp(-2 j^4 s) ds`` for the continuum equation."""
    j = np.arange(J + 1, dtype=float)
    a = 2.0 * j**4
    integral = np.empty_like(a)
    integral[0] = T
    integral[1:] = -np.expm1(-a[1:] * T) / a[1:]
    return float(np.sum(phi_cos(j, xbar) ** 2 * integral))


def linear_rate(y: float, v: float) -> float:
    return y * y / (2.0 * v)


# -- objective on a full path --------------------------------------------------------

def path_objective(coeffs: Coefficients, ops: StepOperators, F: np.ndarray,
                   sigma_min: float = SIGMA_MIN):
    """Value ``1/2 ||h(F)||^2`` and its gradient w.r.t. every entry of ``F``.

    ``F`` has shape ``(m+1, n)``.  Returns ``(value, grad, h)``; when ``sigma``
    drops below the floor the value is a barrier and ``h`` is ``None``.
    """
    m1, n = F.shape
    wq = ops.dt * np.pi / n
    s = coeffs.sigma(F[:-1])
    abs_s = np.abs(s)
    if np.min(abs_s) < sigma_min:
        viol = np.maximum(sigma_min - abs_s, 0.0)
        grad = np.zeros_like(F)
        grad[:-1] = -2.0 * viol * np.sign(s) * coeffs.sigma_prime(F[:-1]) * BARRIER
        return BARRIER * (1.0 + np.sum(viol**2)), grad, None
    bas = ops.basis
    Fh = bas.forward(F)
    lin = bas.inverse(ops.D1 * Fh[1:] - ops.D0 * Fh[:-1])
    mid = None
    if not coeffs.is_linear:
        mid = 0.5 * (F[:-1] + F[1:])
        lin = lin - apply_A(coeffs.b(mid))
    h = lin / s
    value = 0.5 * wq * float(np.sum(h * h))
    a = wq * h / s
    ah = bas.forward(a)
    grad = np.zeros_like(F)
    grad[1:] += bas.inverse(ops.D1 * ah)
    grad[:-1] -= bas.inverse(ops.D0 * ah)
    if mid is not None:
        t = 0.5 * coeffs.b_prime(mid) * apply_A(a)
        grad[1:] -= t
        grad[:-1] -= t
    grad[:-1] -= wq * h * h * coeffs.sigma_prime(F[:-1]) / s
    return value, grad, h


# -- raw transcription ----------------------------------------------------------------

@dataclass
class TranscriptionProblem:
    """Free variables: all nodal values for ``j = 1..m`` except one terminal node."""

    coeffs: Coefficients
    n: int
    m: int
    T: float
    xbar: float
    y: float
    sigma_min: float = SIGMA_MIN

    def __post_init__(self):
        self.ops = StepOperators(self.n, self.T / self.m)
        self.w = SpatialGrid(self.n).interp_weights(self.xbar)
        self.k_elim = int(np.argmax(self.w))
        self.u0 = self.coeffs.u0(SpatialGrid(self.n).nodes)
        keep = np.ones((self.m, self.n), dtype=bool)
        keep[-1, self.k_elim] = False
        self.keep = keep

    @property
    def size(self) -> int:
        return self.m * self.n - 1

    def assemble(self, free: np.ndarray) -> np.ndarray:
        F = np.empty((self.m + 1, self.n))
        F[0] = self.u0
        body = np.zeros((self.m, self.n))
        body[self.keep] = free
        last = body[-1]
        others = self.w @ last - self.w[self.k_elim] * last[self.k_elim]
        last[self.k_elim] = (self.y - others) / self.w[self.k_elim]
        F[1:] = body
        return F

    def free_from_path(self, F: np.ndarray) -> np.ndarray:
        return np.asarray(F)[1:][self.keep]

    def objective_and_gradient(self, free: np.ndarray):
        F = self.assemble(free)
        value, G, _ = path_objective(self.coeffs, self.ops, F, self.sigma_min)
        body = G[1:].copy()
        gk = body[-1, self.k_elim]
        body[-1] -= gk * self.w / self.w[self.k_elim]
        return value, body[self.keep]


# -- preconditioned transcription -------------------------------------------------------

def _smoothstep(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def tent(n: int, xbar: float, width: float = 0.5) -> np.ndarray:
    """Plateau bump at the nodes: 1 within one cell of kappa_n(xbar), smooth decay to 0."""
    grid = SpatialGrid(n)
    center = float(grid.project(xbar))
    d = np.abs(grid.nodes - center) - grid.h
    return 1.0 - _smoothstep(d / width)


@dataclass
class ReducedProblem:
    coeffs: Coefficients
    n: int
    m: int
    T: float
    xbar: float
    y: float
    sigma_min: float = SIGMA_MIN
    F_det: Optional[np.ndarray] = None

    def __post_init__(self):
        self.ops = StepOperators(self.n, self.T / self.m)
        self.w = SpatialGrid(self.n).interp_weights(self.xbar)
        if self.F_det is None:
            self.F_det = deterministic_path(self.coeffs, self.n, self.m, self.T).values
        self.y0 = float(self.w @ self.F_det[-1])
        self.scale = 1.0 / np.sqrt(self.ops.dt * np.pi / self.n)
        K = self.ops.dt * self.ops.Phi
        self._K = K
        adj = np.zeros((self.m, self.n))
        adj[-1] = self.w
        c = self.scale * self.L_T(adj)
        self.c = c
        self.c2 = float(np.sum(c * c))
        self.delta = self.y - self.y0

    # linear response and its transpose, in spectral coordinates
    def L(self, g: np.ndarray) -> np.ndarray:
        bas = self.ops.basis
        gh = bas.forward(g)
        out = np.empty_like(gh)
        for j in range(self.n):
            out[:, j] = scipy.signal.lfilter([self._K[j]], [1.0, -self.ops.E[j]], gh[:, j])
        return bas.inverse(out)

    def L_T(self, a: np.ndarray) -> np.ndarray:
        bas = self.ops.basis
        ah = bas.forward(a)[::-1]
        out = np.empty_like(ah)
        for j in range(self.n):
            out[:, j] = scipy.signal.lfilter([self._K[j]], [1.0, -self.ops.E[j]], ah[:, j])
        return bas.inverse(out[::-1])

    def L_inv(self, D: np.ndarray) -> np.ndarray:
        """Inverse of ``L``: ``D`` holds path offsets for slices ``1..m``."""
        bas = self.ops.basis
        Dh = bas.forward(np.vstack([np.zeros((1, self.n)), D]))
        return bas.inverse((Dh[1:] - self.ops.E * Dh[:-1]) / self._K)

    def u_of_z(self, z: np.ndarray) -> np.ndarray:
        z = z.reshape(self.m, self.n)
        return self.delta * self.c / self.c2 + z - self.c * (np.sum(self.c * z) / self.c2)

    def path_of_z(self, z: np.ndarray) -> np.ndarray:
        g = self.scale * self.u_of_z(z)
        F = self.F_det.copy()
        F[1:] += self.L(g)
        return F

    def z_of_path(self, F: np.ndarray) -> np.ndarray:
        g = self.L_inv(np.asarray(F)[1:] - self.F_det[1:])
        return (g / self.scale).ravel()

    def objective_and_gradient(self, z: np.ndarray):
        F = self.path_of_z(z)
        value, G, _ = path_objective(self.coeffs, self.ops, F, self.sigma_min)
        du = self.scale * self.L_T(G[1:])
        dz = du - self.c * (np.sum(self.c * du) / self.c2)
        return value, dz.ravel()

    def warm_start(self, factor: float = 1.0) -> np.ndarray:
        t = np.linspace(0.0, self.T, self.m + 1)[:, None]
        F = self.F_det + factor * self.delta * (t / self.T) * tent(self.n, self.xbar)[None, :]
        return self.z_of_path(F)


@dataclass
class RateResult:
    y: float
    value: float
    path: SpaceTimePath
    control: Control
    iterations: int
    grad_norm: float
    residual: float
    converged: bool
    y0: float
    start_values: list = field(default_factory=list)
    message: str = ""

    def row(self) -> dict:
        return {"y": self.y, "I": self.value, "iterations": self.iterations,
                "grad_norm": self.grad_norm, "residual": self.residual,
                "converged": int(self.converged)}


@dataclass
class RateOptions:
    maxiter: int = 5000
    maxcor: int = 20
    gtol_rel: float = GTOL_REL
    starts: tuple = ("warm", "warm_x1.5", "linear")
    sigma_min: float = SIGMA_MIN


def _run_lbfgs(prob: ReducedProblem, z0: np.ndarray, opts: RateOptions):
    res = scipy.optimize.minimize(
        prob.objective_and_gradient, z0, jac=True, method="L-BFGS-B",
        options={"maxiter": opts.maxiter, "maxcor": opts.maxcor, "ftol": 1e-16,
                 "gtol": 1e-14, "maxls": 50},
    )
    val, g = prob.objective_and_gradient(res.x)
    return res.x, val, float(np.linalg.norm(g)), int(res.nit), str(res.message)


def minimize_rate(coeffs: Coefficients, n: int, m: int, T: float, xbar: float, y: float,
                  opts: Optional[RateOptions] = None, init_path: Optional[np.ndarray] = None,
                  F_det: Optional[np.ndarray] = None) -> RateResult:
    """Compute ``I^n(y)`` by multi-start L-BFGS on the reduced problem."""
    opts = opts or RateOptions()
    prob = ReducedProblem(coeffs, n, m, T, xbar, y, opts.sigma_min, F_det)
    starts = []
    if init_path is not None:
        starts.append(prob.z_of_path(init_path))
    for s in opts.starts:
        if s == "warm":
            starts.append(prob.warm_start(1.0))
        elif s == "warm_x1.5":
            starts.append(prob.warm_start(1.5))
        elif s == "linear":
            starts.append(np.zeros(m * n))
        else:
            raise ValueError(f"unknown start {s!r}")
    best = None
    values = []
    for z0 in starts:
        out = _run_lbfgs(prob, z0, opts)
        values.append(out[1])
        if best is None or out[1] < best[1]:
            best = out
    z, value, gnorm, nit, msg = best
    if value >= BARRIER:
        raise NondegeneracyError("sigma floor breached by every optimizer start")
    F = prob.path_of_z(z)
    path = SpaceTimePath(F, T)
    h = skeleton_inverse(coeffs, path, opts.sigma_min, check_initial=False)
    check = skeleton_forward(coeffs, h)
    residual = abs(check.terminal_value(xbar) - y)
    converged = gnorm <= opts.gtol_rel * max(1.0, value)
    return RateResult(y, value, path, h, nit, gnorm, residual, bool(converged), prob.y0,
                      values, msg)


def rate_at_y0(coeffs, n, m, T, xbar) -> float:
    return float(deterministic_path(coeffs, n, m, T).terminal_value(xbar))


def level_for_rate(coeffs: Coefficients, n: int, m: int, T: float, xbar: float,
                   target: float, iters: int = 40) -> float:
    """Threshold ``y > y0`` with ``I^n(y) = target``, by bracketing and bisection."""
    F_det = deterministic_path(coeffs, n, m, T).values
    y0 = float(SpatialGrid(n).interp_weights(xbar) @ F_det[-1])
    value = lambda y: minimize_rate(coeffs, n, m, T, xbar, y, F_det=F_det).value
    lo, hi = y0, y0 + 1.0
    while value(hi) < target:
        lo, hi = hi, hi + (hi - y0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if value(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rate_curve(coeffs: Coefficients, n: int, m: int, T: float, xbar: float,
               y_list: Sequence[float], opts: Optional[RateOptions] = None) -> list:
    """``I^n`` along ``y_list``, each point warm-started from its neighbour.

    Each result gets an attribute ``inf_above``: the minimum of the computed
    values over ``z >= y`` on the list.
    """
    F_det = deterministic_path(coeffs, n, m, T).values
    results = []
    prev = None
    for y in y_list:
        try:
            r = minimize_rate(coeffs, n, m, T, xbar, float(y), opts,
                              init_path=None if prev is None else prev.path.values, F_det=F_det)
            prev = r
        except (NondegeneracyError, FloatingPointError, RuntimeError) as exc:
            r = RateResult(float(y), np.nan, None, None, 0, np.nan, np.nan, False, np.nan,
                           message=str(exc))
        results.append(r)
    order = np.argsort([r.y for r in results])
    running = np.inf
    for i in order[::-1]:
        v = results[i].value
        if np.isfinite(v):
            running = min(running, v)
        results[i].inf_above = running
    return results


@dataclass
class ScanRow:
    n: int
    m: int
    value: float
    diff_to_finest: float
    converged: bool
    grad_norm: float


def m_for_n(n: int, m_base: int = 64, n_base: int = 8) -> int:
    """Time steps scaled with ``n^2``."""
    return max(1, int(round(m_base * (n / n_base) ** 2)))


def convergence_scan(coeffs: Coefficients, n_list: Sequence[int], T: float, xbar: float,
                     y: Optional[float] = None, y_offset: float = 0.0, m_base: int = 64,
                     n_base: int = 8, threads: int = 1,
                     opts: Optional[RateOptions] = None) -> list:
    """``I^n(y)`` along ``n_list`` with ``m`` proportional to ``n^2``.

    When ``y`` is ``None`` it is ``y0 + y_offset`` with ``y0`` taken from the
    finest resolution, so the same level is used at every ``n``.
    """
    n_list = [int(n) for n in n_list]
    if y is None:
        nf = max(n_list)
        y = rate_at_y0(coeffs, nf, m_for_n(nf, m_base, n_base), T, xbar) + y_offset

    def task(n):
        m = m_for_n(n, m_base, n_base)
        try:
            return minimize_rate(coeffs, n, m, T, xbar, y, opts), m
        except (NondegeneracyError, RuntimeError) as exc:
            return None, m

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(task, n_list))
    else:
        results = [task(n) for n in n_list]
    finest = results[int(np.argmax(n_list))][0]
    ref = finest.value if finest is not None else np.nan
    rows = []
    for n, (r, m) in zip(n_list, results):
        if r is None:
            rows.append(ScanRow(n, m, np.nan, np.nan, False, np.nan))
        else:
            rows.append(ScanRow(n, m, r.value, abs(r.value - ref), r.converged, r.grad_norm))
    return rows


def gamma_limsup_probe(coeffs: Coefficients, result: RateResult, xbar: float,
                       factors: Sequence[int] = (2, 4), width: float = 0.5) -> list:
    """Recovery-sequence values ``J^{kn}`` built from the minimizer at resolution n.

    The optimal control is refined onto ``k n`` cells and ``k^2 m`` steps, then
    corrected by a multiple of a plateau bump so the terminal constraint holds.
    Returns the corrected ``1/2 ||h||^2`` for each factor.
    """
    h = result.control
    out = []
    for k in factors:
        n2, m2 = h.n * k, h.m * k * k
        vals = np.repeat(np.repeat(h.values, k * k, axis=0), k, axis=1)
        bump = np.broadcast_to(tent(n2, xbar, width), (m2, n2))

        def miss(a):
            c = Control(vals + a * bump, h.T)
            return skeleton_forward(coeffs, c).terminal_value(xbar) - result.y

        a0, a1 = 0.0, 0.1
        f0, f1 = miss(a0), miss(a1)
        for _ in range(30):
            if abs(f1) < 1e-12 or f1 == f0:
                break
            a0, a1, f0 = a1, a1 - f1 * (a1 - a0) / (f1 - f0), f1
            f1 = miss(a1)
        out.append(0.5 * Control(vals + a1 * bump, h.T).norm2())
    return out
