"""Exponential time stepping for ``f' = -A^2 f + A b(f) + forcing``.

One step of size ``dt`` reads, in the eigenbasis of ``A_n`` with
``z = lambda^2 dt``::

    U+ = e^{-z} U + dt phi1(z) lambda B((U + U+)/2) + phi1(z) F

where ``F`` is the forcing integrated over the step (``sigma(U) h dt`` for the
skeleton, plus ``sigma(U) sqrt(eps n/pi) dW`` for the SDE).  The linear part
is exact, the drift is implicit midpoint and the forcing is left-point.  Given
two consecutive slices the forcing is recovered exactly::

    F / dt = D1 U+ - D0 U - A B((U + U+)/2),  D1 = 1/(dt phi1), D0 = e^{-z}/(dt phi1)

which makes the forward map and the control inversion exact inverses.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .discrete_space import SpectralBasis, basis, phi1
from .model import Coefficients

FIXED_POINT_TOL = 1e-14
FIXED_POINT_MAXITER = 60
NEWTON_MAXITER = 30


class StiffnessError(RuntimeError):
    """Non-finite state or a failed implicit solve; a finer time grid is needed."""


@dataclass(frozen=True)
class StepOperators:
    n: int
    dt: float

    @cached_property
    def basis(self) -> SpectralBasis:
        return basis(self.n)

    @cached_property
    def z(self) -> np.ndarray:
        return self.basis.lam**2 * self.dt

    @cached_property
    def E(self) -> np.ndarray:
        return np.exp(-self.z)

    @cached_property
    def Phi(self) -> np.ndarray:
        return phi1(self.z)

    @cached_property
    def KA(self) -> np.ndarray:
        return self.dt * self.Phi * self.basis.lam

    @cached_property
    def D1(self) -> np.ndarray:
        return 1.0 / (self.dt * self.Phi)

    @cached_property
    def D0(self) -> np.ndarray:
        return self.E / (self.dt * self.Phi)

    @cached_property
    def KA_dense(self) -> np.ndarray:
        return self.basis.dense(self.KA)

    def apply(self, d: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.basis.apply_diag(d, v)


def implicit_step(ops: StepOperators, coeffs: Coefficients, u: np.ndarray,
                  forcing: np.ndarray) -> np.ndarray:
    """Advance ``u`` (shape ``(..., n)``) by one step with integrated ``forcing``."""
    bas = ops.basis
    rhs = bas.inverse(ops.E * bas.forward(u) + ops.Phi * bas.forward(forcing))
    if coeffs.is_linear:
        if not np.all(np.isfinite(rhs)):
            raise StiffnessError("non-finite state in time step; try doubling m")
        return rhs
    x = rhs + ops.apply(ops.KA, coeffs.b(u))
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(FIXED_POINT_MAXITER):
            x_new = rhs + ops.apply(ops.KA, coeffs.b(0.5 * (u + x)))
            err = np.max(np.abs(x_new - x), axis=-1)
            x = x_new
            done = err <= FIXED_POINT_TOL * (1.0 + np.max(np.abs(x), axis=-1))
            if np.all(done):
                break
        else:
            x = _newton_rows(ops, coeffs, u, rhs, x, done)
    if not np.all(np.isfinite(x)):
        raise StiffnessError("non-finite state in time step; try doubling m")
    return x


def _newton_rows(ops, coeffs, u, rhs, x, done):
    u2 = np.atleast_2d(u)
    r2 = np.atleast_2d(rhs)
    x2 = np.array(np.atleast_2d(x))
    done = np.atleast_1d(done)
    eye = np.eye(ops.n)
    for i in np.flatnonzero(~done):
        xi = x2[i] if np.all(np.isfinite(x2[i])) else r2[i].copy()
        for _ in range(NEWTON_MAXITER):
            mid = 0.5 * (u2[i] + xi)
            g = xi - r2[i] - ops.KA_dense @ coeffs.b(mid)
            jac = eye - 0.5 * ops.KA_dense * coeffs.b_prime(mid)[None, :]
            dx = np.linalg.solve(jac, g)
            xi = xi - dx
            if not np.all(np.isfinite(xi)):
                break
            if np.max(np.abs(dx)) <= FIXED_POINT_TOL * (1.0 + np.max(np.abs(xi))):
                break
        else:
            raise StiffnessError("implicit step did not converge; try doubling m")
        x2[i] = xi
    return x2.reshape(np.shape(x))


def recover_forcing(ops: StepOperators, coeffs: Coefficients, u: np.ndarray,
                    u_next: np.ndarray) -> np.ndarray:
    """Forcing rate ``F/dt`` that carries ``u`` to ``u_next`` in one step."""
    bas = ops.basis
    lin = bas.inverse(ops.D1 * bas.forward(u_next) - ops.D0 * bas.forward(u))
    if coeffs.is_linear:
        return lin
    mid = 0.5 * (u + u_next)
    return lin - bas.inverse(bas.lam * bas.forward(coeffs.b(mid)))
