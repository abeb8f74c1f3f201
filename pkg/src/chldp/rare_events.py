"""Monte Carlo estimates of ``P(u^{eps,n}(T, xbar) >= y)`` and the large-deviation fit.

Samples are processed in fixed blocks (see :mod:`chldp.sde`).  Each block is
an independent job; block results are reduced in block order, so the
estimate does not depend on the number of worker threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .discrete_space import SpatialGrid
from .model import Coefficients
from .sde import BLOCK_SIZE, NoiseIncrements, girsanov_log_weight, simulate_paths
from .skeleton import Control


@dataclass
class McEstimate:
    eps: float
    n: int
    y: float
    samples: int
    p_hat: float
    stderr: float
    hits: int
    importance_sampling: bool
    weight_mean: float = 1.0
    weight_mean_se: float = 0.0
    log_weight_mean: float = 0.0
    log_weight_var: float = 0.0
    tilt_s2: float = 0.0
    flag: str = ""

    @property
    def minus_eps_log_p(self) -> float:
        return -self.eps * np.log(self.p_hat) if self.p_hat > 0 else np.inf

    @property
    def weight_audit_ok(self) -> bool:
        """Audit of the likelihood ratio (always true without a tilt).

        Under the tilted law ``log w ~ N(-s2/2, s2)`` exactly, with
        ``s2 = ||h||^2 / eps``.  Its sample mean and variance are checked
        within 3 standard errors.  ``E[w] = 1`` is also checked when
        ``s2 <= 1``; for larger tilts the lognormal sample mean is dominated
        by unsampled events and its standard error is not informative.
        """
        if not self.importance_sampling:
            return True
        s2, N = self.tilt_s2, float(self.samples)
        ok = abs(self.log_weight_mean + 0.5 * s2) <= 3.0 * np.sqrt(s2 / N) + 1e-12
        ok &= abs(self.log_weight_var - s2) <= 3.0 * s2 * np.sqrt(2.0 / (N - 1)) + 1e-12
        if s2 <= 1.0:
            ok &= abs(self.weight_mean - 1.0) <= 3.0 * self.weight_mean_se + 1e-12
        return bool(ok)


def _block_sums(coeffs, n, m, T, eps, y, xbar, seed, block, size, tilt):
    noise = NoiseIncrements.block(seed, block, m, n, T, size)
    w_x = SpatialGrid(n).interp_weights(xbar)
    u_T = simulate_paths(coeffs, noise, eps, control=tilt, keep_path=False)
    hit = (u_T @ w_x) >= y
    if tilt is None:
        lw = np.zeros(size)
    else:
        lw = girsanov_log_weight(noise, tilt, eps)
    wts = np.exp(lw)
    est = wts * hit
    return np.array([est.sum(), (est**2).sum(), wts.sum(), (wts**2).sum(), hit.sum(),
                     lw.sum(), (lw**2).sum()])


def mc_hitting_probability(coeffs: Coefficients, n: int, m: int, T: float, eps: float,
                           y: float, xbar: float, samples: int, seed: int = 0,
                           tilt: Optional[Control] = None, threads: int = 1,
                           block_size: int = BLOCK_SIZE) -> McEstimate:
    """Estimate ``P(Pi_n U(T)(xbar) >= y)``; with ``tilt`` the estimator is importance sampled."""
    if samples < 100:
        raise ValueError("need at least 100 samples")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if y == -np.inf:
        return McEstimate(eps, n, y, samples, 1.0, 0.0, samples, False)
    n_blocks = -(-samples // block_size)
    sizes = [block_size] * (n_blocks - 1) + [samples - block_size * (n_blocks - 1)]

    def job(b):
        return _block_sums(coeffs, n, m, T, eps, y, xbar, seed, b, sizes[b], tilt)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(job, range(n_blocks)))
    else:
        parts = [job(b) for b in range(n_blocks)]
    tot = np.zeros(7)
    for p in parts:
        tot += p
    N = float(samples)
    p_hat = tot[0] / N
    hits = int(tot[4])
    lm, lv, s2 = 0.0, 0.0, 0.0
    if tilt is None:
        se = np.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / N)
        wm, wse = 1.0, 0.0
    else:
        se = np.sqrt(max(tot[1] / N - p_hat**2, 0.0) / N)
        wm = tot[2] / N
        wse = np.sqrt(max(tot[3] / N - wm**2, 0.0) / N)
        lm = tot[5] / N
        lv = max(tot[6] - N * lm * lm, 0.0) / (N - 1.0)
        s2 = tilt.norm2() / eps
    flag = ""
    if hits == 0:
        flag = "underflow; use importance sampling" if tilt is None else "underflow"
    return McEstimate(eps, n, y, samples, float(p_hat), float(se), hits, tilt is not None,
                      float(wm), float(wse), float(lm), float(lv), float(s2), flag)


@dataclass
class LdpFit:
    eps: np.ndarray
    estimates: list
    minus_eps_log_p: np.ndarray
    limit: float
    slope: float
    rate_inf: float
    rel_gap: float
    excluded: list = field(default_factory=list)

    def rows(self) -> list:
        out = []
        for e in self.estimates:
            out.append({"eps": e.eps, "P_hat": e.p_hat, "stderr": e.stderr,
                        "minus_eps_logP": e.minus_eps_log_p, "I_inf": self.rate_inf,
                        "rel_gap": abs(e.minus_eps_log_p - self.rate_inf) / self.rate_inf
                        if self.rate_inf > 0 else np.nan})
        return out


def ldp_fit(coeffs: Coefficients, n: int, m: int, T: float, xbar: float, y: float,
            eps_list: Sequence[float], samples: int, rate_inf: float, seed: int = 0,
            tilt: Optional[Control] = None, threads: int = 1) -> LdpFit:
    """Fit ``-eps log P_hat`` linearly in eps and compare the intercept with ``rate_inf``.

    ``rate_inf`` is ``inf_{z >= y} I^n(z)``, normally from :func:`chldp.rate.rate_curve`.
    """
    eps_arr = np.asarray(eps_list, dtype=float)
    if np.any(np.diff(eps_arr) >= 0):
        raise ValueError("eps_list must be decreasing")
    ests, excluded = [], []
    for i, eps in enumerate(eps_arr):
        est = mc_hitting_probability(coeffs, n, m, T, float(eps), y, xbar, samples,
                                     seed + i, tilt, threads)
        ests.append(est)
        if est.p_hat <= 0:
            excluded.append(float(eps))
    good = [(e.eps, e.minus_eps_log_p) for e in ests if e.p_hat > 0]
    vals = np.array([e.minus_eps_log_p for e in ests])
    if len(good) >= 2:
        ge, gv = np.array(good).T
        slope, limit = np.polyfit(ge, gv, 1)
    elif len(good) == 1:
        slope, limit = np.nan, good[0][1]
    else:
        slope, limit = np.nan, np.nan
    gap = abs(limit - rate_inf) / rate_inf if rate_inf > 0 else abs(limit)
    return LdpFit(eps_arr, ests, vals, float(limit), float(slope), float(rate_inf),
                  float(gap), excluded)
