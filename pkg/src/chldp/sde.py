"""Sample paths of the n-dimensional small-noise SDE and its controlled variant.

    dU = (-A_n^2 U + A_n b(U)) dt + sqrt(eps n / pi) sigma(U) dW^n

with ``W^n`` a standard n-dimensional Brownian motion.  Noise is drawn in
fixed blocks of paths; block ``i`` uses a Philox generator keyed by
``(seed, i)``, so any path can be regenerated and serial and threaded runs
see identical increments.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .discrete_space import SpatialGrid
from .model import Coefficients
from .skeleton import Control
from .timestep import StepOperators, StiffnessError, implicit_step

BLOCK_SIZE = 4096


def block_generator(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class NoiseIncrements:
    """Brownian increments of shape ``(m, paths, n)``, each ``N(0, dt)``."""

    dW: np.ndarray
    T: float
    seed: Optional[int] = None

    @property
    def m(self) -> int:
        return self.dW.shape[0]

    @property
    def paths(self) -> int:
        return self.dW.shape[1]

    @property
    def n(self) -> int:
        return self.dW.shape[2]

    @property
    def dt(self) -> float:
        return self.T / self.m

    @classmethod
    def block(cls, seed: int, block: int, m: int, n: int, T: float,
              size: int = BLOCK_SIZE) -> "NoiseIncrements":
        rng = block_generator(seed, block)
        dW = rng.standard_normal((m, size, n)) * np.sqrt(T / m)
        return cls(dW, T, seed)

    @classmethod
    def for_path(cls, seed: int, index: int, m: int, n: int, T: float) -> "NoiseIncrements":
        blk = cls.block(seed, index // BLOCK_SIZE, m, n, T)
        k = index % BLOCK_SIZE
        return cls(blk.dW[:, k:k + 1, :].copy(), T, seed)

    def path(self, k: int) -> np.ndarray:
        return self.dW[:, k, :]


@dataclass
class SdePath:
    times: np.ndarray
    states: np.ndarray  # (m+1, paths, n)
    eps: float

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def field(self, x, j: int = -1) -> np.ndarray:
        """Pi_n interpolation of slice ``j`` for every path."""
        grid = SpatialGrid(self.states.shape[-1])
        w = np.stack([grid.interp_weights(float(xi)) for xi in np.atleast_1d(x)])
        return self.states[j] @ w.T


def simulate_paths(coeffs: Coefficients, noise: NoiseIncrements, eps: float,
                   control: Optional[Control] = None, keep_path: bool = True):
    """Integrate a batch of paths; with ``control`` the drift ``sigma(U) h`` is added.

    Returns an :class:`SdePath` when ``keep_path`` else the terminal states
    of shape ``(paths, n)``.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    m, paths, n = noise.dW.shape
    ops = StepOperators(n, noise.dt)
    h = None
    if control is not None:
        if control.m != m or control.n != n:
            raise ValueError("control and noise must share the (m, n) grid")
        h = control.values
    amp = np.sqrt(eps * n / np.pi)
    u = np.broadcast_to(coeffs.u0(SpatialGrid(n).nodes), (paths, n)).copy()
    states = np.empty((m + 1, paths, n)) if keep_path else None
    if keep_path:
        states[0] = u
    for j in range(m):
        drive = amp * noise.dW[j]
        if h is not None:
            drive = drive + h[j] * ops.dt
        try:
            u = implicit_step(ops, coeffs, u, coeffs.sigma(u) * drive)
        except StiffnessError as exc:
            raise StiffnessError(f"{exc} (step {j}, m={m}; suggest m={2 * m})") from None
        if keep_path:
            states[j + 1] = u
    if keep_path:
        return SdePath(np.linspace(0.0, noise.T, m + 1), states, eps)
    return u


def simulate_path(coeffs: Coefficients, n: int, m: int, T: float, eps: float,
                  noise: Optional[NoiseIncrements] = None, seed: int = 0,
                  index: int = 0) -> SdePath:
    """One path; noise defaults to path ``index`` of the stream ``seed``."""
    if noise is None:
        noise = NoiseIncrements.for_path(seed, index, m, n, T)
    return simulate_paths(coeffs, noise, eps)


def simulate_controlled_path(coeffs: Coefficients, n: int, m: int, T: float, eps: float,
                             control: Control, noise: Optional[NoiseIncrements] = None,
                             seed: int = 0, index: int = 0) -> SdePath:
    if noise is None:
        noise = NoiseIncrements.for_path(seed, index, m, n, T)
    return simulate_paths(coeffs, noise, eps, control=control)


def girsanov_log_weight(noise: NoiseIncrements, control: Control, eps: float) -> np.ndarray:
    """Log of ``dP/dQ`` for each path, where the Q-noise is ``noise``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    q = control.to_q()  # (m, n)
    cross = np.einsum("jn,jpn->p", q, noise.dW)
    return -cross / np.sqrt(eps) - control.norm2() / (2.0 * eps)


def girsanov_weight(noise: NoiseIncrements, control: Control, eps: float) -> np.ndarray:
    return np.exp(girsanov_log_weight(noise, control, eps))
