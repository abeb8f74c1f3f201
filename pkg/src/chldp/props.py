"""Operator and inequality property suites run by the ``props`` subcommand."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discrete_space import (SpatialGrid, a_matrix, apply_A, basis, discrete_laplacian,
                             fractional_power, lnorm, mean_operator, phi_cos, semigroup_apply)
from .green import DiscreteGreen
from .model import cubic_drift_bounds


@dataclass
class PropResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""


def eigenpairs(n_list=(2, 4, 8, 16, 64, 256), tol=1e-10) -> PropResult:
    worst = 0.0
    for n in n_list:
        b = basis(n)
        P = b.matrix
        resid = a_matrix(n) @ P - P * b.lam
        scale = max(1.0, float(np.max(np.abs(b.lam))))
        worst = max(worst, float(np.max(np.abs(resid))) / scale)
    return PropResult("eigenpairs", worst <= tol, worst, f"max rel residual over n={list(n_list)}")


def nodal_laplacian(n_list=(2, 4, 8, 16, 64, 256), tol=1e-12) -> PropResult:
    """Delta_n phi_j(x_k) = lambda_j phi_j(x_k), normwise relative to ||A_n|| max|phi_j|."""
    worst = 0.0
    for n in n_list:
        grid = SpatialGrid(n)
        lam = basis(n).lam
        norm_a = float(np.max(np.abs(lam)))
        for j in range(n):
            lap = discrete_laplacian(lambda x: phi_cos(j, x), n)
            got = lap(grid.nodes)
            want = lam[j] * phi_cos(j, grid.nodes)
            scale = max(norm_a, 1.0) * float(np.max(np.abs(phi_cos(j, grid.nodes))))
            worst = max(worst, float(np.max(np.abs(got - want))) / scale)
    return PropResult("nodal_laplacian", worst <= tol, worst)


def integration_by_parts(n_list=(2, 4, 8, 16, 64, 256), pairs=100, tol=1e-12, seed=0) -> PropResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in n_list:
        u = rng.standard_normal((pairs, n))
        v = rng.standard_normal((pairs, n))
        lhs = np.pi / n * np.sum(apply_A(u) * v, axis=1)
        rhs = np.pi / n * np.sum(u * apply_A(v), axis=1)
        scale = np.pi / n * np.sum(np.abs(apply_A(u) * v), axis=1) + 1.0
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / scale)))
    return PropResult("integration_by_parts", worst <= tol, worst)


def l2h1(n_list=(8, 16, 32, 64, 128, 256), samples=1000, seed=0) -> PropResult:
    """||a||_inf <= sqrt(pi) ||a||_2 + ||(-A)^{1/2} a||_2 on random vectors."""
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    for n in n_list:
        a = _random_vectors(rng, samples, n)
        lhs = lnorm(a, np.inf)
        rhs = np.sqrt(np.pi) * lnorm(a, 2) + lnorm(fractional_power(0.5, a), 2)
        violations += int(np.sum(lhs > rhs))
        worst = max(worst, float(np.max(lhs / rhs)))
    return PropResult("l2H1", violations == 0, worst, f"{violations} violations; max lhs/rhs")


def _random_vectors(rng, samples, n):
    """Mix of white noise, smooth modes and spikes, so the sup norm is probed hard."""
    third = samples // 3
    white = rng.standard_normal((third, n))
    coef = rng.standard_normal((third, n)) / (1.0 + np.arange(n)) ** 2
    smooth = basis(n).inverse(coef)
    spikes = np.zeros((samples - 2 * third, n))
    spikes[np.arange(spikes.shape[0]), rng.integers(0, n, spikes.shape[0])] = 1.0
    return np.vstack([white, smooth, spikes])


def _stable(ks, ratio=1.5) -> bool:
    """No growth: the finer-half max is within ``ratio`` of the coarser-half max."""
    half = max(1, len(ks) // 2)
    return max(ks[half:]) <= ratio * max(ks[:half])


def l6h2_constants(n_list=(8, 16, 32, 64, 128, 256), samples=600, seed=0) -> PropResult:
    """Empirical C in ||a||_6 <= C (||A a||^{1/6} ||a||^{5/6} + ||a||), all norms l_n."""
    rng = np.random.default_rng(seed)
    ks = []
    for n in n_list:
        a = _random_vectors(rng, samples, n)
        den = lnorm(apply_A(a), 2) ** (1 / 6) * lnorm(a, 2) ** (5 / 6) + lnorm(a, 2)
        ks.append(float(np.max(lnorm(a, 6) / den)))
    return PropResult("l6h2_constants", _stable(ks), max(ks), f"constants {np.round(ks, 4).tolist()}")


def smoothing_constants(n_list=(8, 16, 32, 64, 128, 256), samples=300,
                        times=(1e-4, 1e-3, 1e-2, 1e-1), seed=0) -> PropResult:
    """Empirical C in ||e^{-A^2 t} a||_inf <= (1 + C t^{-1/8}) ||a||_2."""
    rng = np.random.default_rng(seed)
    ks = []
    for n in n_list:
        a = _random_vectors(rng, samples, n)
        k = 0.0
        for t in times:
            r = lnorm(semigroup_apply(t, a), np.inf) / lnorm(a, 2)
            k = max(k, float(np.max((r - 1.0) * t ** 0.125)))
        ks.append(k)
    return PropResult("smoothing_constants", _stable(ks), max(ks),
                      f"constants {np.round(ks, 4).tolist()}")


def lalb_identity(n_list=(4, 16, 64), pairs=50, tol=1e-10, seed=0) -> PropResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in n_list:
        a = rng.standard_normal((pairs, n))
        b = rng.standard_normal((pairs, n))
        lhs = np.sum(fractional_power(-1.0, a, dotted=True) * apply_A(b), axis=1)
        rhs = -np.sum(a * b, axis=1) + n * mean_operator(a) * mean_operator(b)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / (1.0 + np.abs(rhs)))))
    return PropResult("LaLb_identity", worst <= tol, worst)


def mean_bound(n_list=(4, 16, 64), samples=200, seed=0) -> PropResult:
    rng = np.random.default_rng(seed)
    ok = True
    worst = 0.0
    for n in n_list:
        a = rng.standard_normal((samples, n)) + rng.standard_normal((samples, 1))
        ratio = np.sqrt(n) * np.abs(mean_operator(a)) / np.linalg.norm(a, axis=1)
        worst = max(worst, float(ratio.max()))
        ok &= bool(np.all(ratio <= 1.0 + 1e-12))
    return PropResult("mean_bound", ok, worst)


def spectral_norm_bound(n_list=(2, 4, 8, 16, 64, 256)) -> PropResult:
    worst = max(float(np.max(-basis(n).lam)) / (n - 1) ** 2 for n in n_list)
    return PropResult("spectral_norm_bound", worst <= 1.0 + 1e-12, worst)


def semigroup_contraction(n_list=(4, 16, 64), samples=50, seed=0) -> PropResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in n_list:
        v = rng.standard_normal((samples, n))
        t = rng.uniform(0.0, 1.0)
        worst = max(worst, float(np.max(lnorm(semigroup_apply(t, v), 2) / lnorm(v, 2))))
    return PropResult("semigroup_contraction", worst <= 1.0 + 1e-12, worst)


def green_mass(n_list=(4, 16, 32), times=(0.0, 0.01, 0.3), xs=(0.2, 1.0, 3.0)) -> PropResult:
    worst = 0.0
    for n in n_list:
        g = DiscreteGreen(n)
        y = SpatialGrid(n).nodes
        for t in times:
            for x in xs:
                mass = np.pi / n * np.sum(g(t, x, y))
                worst = max(worst, abs(mass - 1.0))
    return PropResult("green_mass", worst <= 1e-12, worst)


def cubic_drift(samples=10_000, seed=0) -> PropResult:
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(-5, 5, (2, samples))
    one_side, lip = cubic_drift_bounds(x, y)
    b = lambda v: v**3 - v
    ok1 = np.all(one_side <= (x - y) ** 2 + 1e-9)
    ratio = np.abs(b(x) - b(y)) / (lip * np.abs(x - y) + 1e-300)
    return PropResult("cubic_drift_bounds", bool(ok1 and ratio.max() <= 4.0), float(ratio.max()),
                      "max |b(x)-b(y)| / ((1+x^2+y^2)|x-y|)")


SUITE = (eigenpairs, nodal_laplacian, integration_by_parts, l2h1, l6h2_constants, smoothing_constants,
         lalb_identity, mean_bound, spectral_norm_bound, semigroup_contraction, green_mass,
         cubic_drift)


def run_all() -> list:
    return [fn() for fn in SUITE]
