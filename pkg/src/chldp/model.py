"""Problem coefficients for the stochastic Cahn-Hilliard equation.

The drift nonlinearity ``b``, the noise coefficient ``sigma`` and the initial
datum ``u0`` are plain scalar maps.  They are bundled in :class:`Coefficients`
together with their derivatives, and :func:`validate_assumptions` checks the
standing hypotheses (bounded, globally Lipschitz and nonvanishing ``sigma``;
Neumann-compatible ``u0``) by dense scanning.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

ScalarMap = Callable[[np.ndarray], np.ndarray]

#: Default floor on ``|sigma|`` used when a path is inverted to its control.
SIGMA_MIN = 1e-6

#: Concrete constant in ``|b(x)-b(y)| <= C0 (1+x^2+y^2)|x-y|`` for the cubic drift.
CUBIC_LIP_C0 = 4.0


def _fd_derivative(fn: ScalarMap, order: int, step: float = 1e-3) -> ScalarMap:
    """High-order central difference derivative of ``fn`` (orders 1 to 3)."""
    # 6th-order accurate central stencils
    stencils = {
        1: (np.array([-3, -2, -1, 1, 2, 3]), np.array([-1, 9, -45, 45, -9, 1]) / 60.0),
        2: (np.array([-3, -2, -1, 0, 1, 2, 3]),
            np.array([2, -27, 270, -490, 270, -27, 2]) / 180.0),
        3: (np.array([-4, -3, -2, -1, 1, 2, 3, 4]),
            np.array([-7, 72, -338, 488, -488, 338, -72, 7]) / 240.0),
    }
    offsets, weights = stencils[order]

    def deriv(x):
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x)
        for o, w in zip(offsets, weights):
            acc = acc + w * fn(x + o * step)
        return acc / step**order

    return deriv


@dataclass(frozen=True)
class Coefficients:
    """Drift, diffusion and initial datum of the equation.

    ``u0_derivs`` holds the first three derivatives of ``u0``; when not
    supplied they are generated by finite differences.
    """

    b: ScalarMap
    b_prime: ScalarMap
    sigma: ScalarMap
    sigma_prime: ScalarMap
    u0: ScalarMap
    u0_derivs: tuple = ()
    is_default_b: bool = False
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.u0_derivs) < 3:
            derivs = tuple(self.u0_derivs) + tuple(
                _fd_derivative(self.u0, k) for k in range(len(self.u0_derivs) + 1, 4)
            )
            object.__setattr__(self, "u0_derivs", derivs)

    @property
    def is_linear(self) -> bool:
        return self.names.get("b") == "zero"

    def describe(self) -> dict:
        return dict(self.names)


# -- named coefficient families -------------------------------------------------

def cubic_drift() -> tuple[ScalarMap, ScalarMap]:
    return (lambda x: x**3 - x), (lambda x: 3.0 * x**2 - 1.0)


def zero_drift() -> tuple[ScalarMap, ScalarMap]:
    return (lambda x: np.zeros_like(np.asarray(x, dtype=float))), \
           (lambda x: np.zeros_like(np.asarray(x, dtype=float)))


def sigma_one():
    return (lambda x: np.ones_like(np.asarray(x, dtype=float))), \
           (lambda x: np.zeros_like(np.asarray(x, dtype=float)))


def sigma_shifted_sine(c: float):
    return (lambda x: c + np.sin(x)), (lambda x: np.cos(x))


def sigma_tanh_clamp(c: float):
    # 1 + c tanh(x): bounded, Lipschitz, and nonvanishing for |c| < 1
    return (lambda x: 1.0 + c * np.tanh(x)), (lambda x: c / np.cosh(x) ** 2)


def u0_constant(c: float):
    z = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return (lambda x: np.full_like(np.asarray(x, dtype=float), c)), (z, z, z)


def u0_cosine(k: float, amplitude: float = 1.0):
    a = amplitude
    return (lambda x: a * np.cos(k * x)), (
        lambda x: -a * k * np.sin(k * x),
        lambda x: -a * k**2 * np.cos(k * x),
        lambda x: a * k**3 * np.sin(k * x),
    )


def u0_polynomial(coeffs: Sequence[float], tol: float = 1e-8):
    """Polynomial initial datum ``sum_i coeffs[i] x**i``; must satisfy u0'(0)=u0'(pi)=0."""
    p = np.polynomial.Polynomial(list(coeffs))
    d1, d2, d3 = p.deriv(1), p.deriv(2), p.deriv(3)
    if abs(d1(0.0)) > tol or abs(d1(np.pi)) > tol:
        raise ValueError(
            f"polynomial u0 is not Neumann compatible: u0'(0)={d1(0.0):.3e}, "
            f"u0'(pi)={d1(np.pi):.3e}"
        )
    return (lambda x: p(np.asarray(x, dtype=float))), (
        lambda x: d1(np.asarray(x, dtype=float)),
        lambda x: d2(np.asarray(x, dtype=float)),
        lambda x: d3(np.asarray(x, dtype=float)),
    )


def make_coefficients(
    b: str = "cubic",
    sigma: str = "one",
    sigma_param: float = 2.0,
    u0: str = "cos",
    u0_params: Optional[Sequence[float]] = None,
) -> Coefficients:
    """Build coefficients from the names accepted in config files.

    ``b``: ``cubic`` or ``zero``.  ``sigma``: ``one``, ``shifted_sine`` (c + sin x)
    or ``tanh_clamp`` (1 + c tanh x).  ``u0``: ``constant`` (c), ``cos``
    (k, amplitude) or ``polynomial`` (coefficients, lowest degree first).
    """
    if b == "cubic":
        bf, bp = cubic_drift()
    elif b == "zero":
        bf, bp = zero_drift()
    else:
        raise ValueError(f"unknown drift {b!r}")

    if sigma == "one":
        sf, sp = sigma_one()
    elif sigma == "shifted_sine":
        sf, sp = sigma_shifted_sine(sigma_param)
    elif sigma == "tanh_clamp":
        sf, sp = sigma_tanh_clamp(sigma_param)
    else:
        raise ValueError(f"unknown sigma {sigma!r}")

    params = list(u0_params) if u0_params is not None else None
    if u0 == "constant":
        uf, ud = u0_constant(params[0] if params else 0.0)
    elif u0 == "cos":
        k = params[0] if params else 1.0
        amp = params[1] if params and len(params) > 1 else 1.0
        uf, ud = u0_cosine(k, amp)
    elif u0 == "polynomial":
        uf, ud = u0_polynomial(params or [0.0])
    else:
        raise ValueError(f"unknown u0 {u0!r}")

    names = {"b": b, "sigma": sigma, "sigma_param": sigma_param, "u0": u0,
             "u0_params": params}
    return Coefficients(bf, bp, sf, sp, uf, ud, is_default_b=(b == "cubic"), names=names)


def linear_coefficients() -> Coefficients:
    """b = 0, sigma = 1, u0 = 0: the Gaussian case with a closed-form rate."""
    return make_coefficients(b="zero", sigma="one", u0="constant", u0_params=[0.0])


# -- assumption checks ----------------------------------------------------------

@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    value: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list
    sigma_sup: float
    sigma_lipschitz: float
    min_abs_sigma: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "sigma_sup": self.sigma_sup,
            "sigma_lipschitz": self.sigma_lipschitz,
            "min_abs_sigma": self.min_abs_sigma,
            "checks": [vars(c) for c in self.checks],
        }


def _finite(name: str, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"non-finite evaluation of {name} on the scan grid")
    return values


def validate_assumptions(
    coeffs: Coefficients,
    scan: tuple = (-10.0, 10.0, 10_000),
    sigma_bound: Optional[float] = None,
    sigma_min: float = SIGMA_MIN,
    require_nondegenerate: bool = True,
    neumann_tol: float = 1e-8,
) -> ValidationReport:
    """Check boundedness/Lipschitz/nonvanishing of sigma and u0 compatibility.

    Without an explicit ``sigma_bound`` the boundedness check compares the
    sup of ``|sigma|`` on the scan range with the sup on a ten times wider
    range; growth means sigma is not bounded.  The Lipschitz check uses the
    same comparison on adjacent-point difference quotients.
    """
    lo, hi, npts = scan
    x = np.linspace(lo, hi, int(npts))
    wide = np.linspace(10 * lo, 10 * hi, int(npts) * 10)
    s = _finite("sigma", coeffs.sigma(x))
    s_wide = _finite("sigma", coeffs.sigma(wide))

    sup = float(np.max(np.abs(s)))
    sup_wide = float(np.max(np.abs(s_wide)))
    if sigma_bound is None:
        bounded = sup_wide <= 1.01 * sup + 1e-12
        bdetail = f"sup|sigma| = {sup:.6g} on scan, {sup_wide:.6g} on 10x range"
    else:
        bounded = sup_wide <= sigma_bound
        bdetail = f"sup|sigma| = {sup_wide:.6g} vs bound {sigma_bound:.6g}"

    lip = float(np.max(np.abs(np.diff(s)) / np.diff(x)))
    lip_wide = float(np.max(np.abs(np.diff(s_wide)) / np.diff(wide)))
    lipschitz = np.isfinite(lip) and lip_wide <= 1.01 * lip + 1e-9

    abs_s = np.abs(s)
    min_abs = float(abs_s.min())
    sign_change = bool(np.any(np.sign(s[:-1]) * np.sign(s[1:]) < 0))
    if sign_change:
        min_abs = 0.0
    nondeg = (min_abs >= sigma_min) and not sign_change

    d1 = coeffs.u0_derivs[0]
    ends = _finite("u0'", d1(np.array([0.0, np.pi])))
    neumann = bool(np.max(np.abs(ends)) <= neumann_tol)
    _finite("b", coeffs.b(x))
    _finite("u0", coeffs.u0(np.linspace(0.0, np.pi, 257)))

    checks = [
        AssumptionCheck("sigma_bounded", bool(bounded), sup, bdetail),
        AssumptionCheck("sigma_lipschitz", bool(lipschitz), lip,
                        f"Lipschitz estimate {lip:.6g} (10x range {lip_wide:.6g})"),
        AssumptionCheck("u0_neumann", neumann, float(np.max(np.abs(ends))),
                        f"u0'(0)={ends[0]:.3e}, u0'(pi)={ends[1]:.3e}"),
    ]
    if require_nondegenerate:
        checks.append(AssumptionCheck(
            "sigma_nondegenerate", bool(nondeg), min_abs,
            "sigma changes sign on the scan grid" if sign_change
            else f"min|sigma| = {min_abs:.6g} vs floor {sigma_min:g}",
        ))
    return ValidationReport(checks, sup, lip, min_abs)


def cubic_drift_bounds(x: float, y: float) -> tuple[float, float]:
    """Return ``((b(y)-b(x))(x-y), 1+x^2+y^2)`` for ``b(x) = x^3 - x``.

    The first entry never exceeds ``(x-y)^2``; the second is the factor in
    ``|b(x)-b(y)| <= C0 (1+x^2+y^2)|x-y|``.
    """
    b = lambda v: v**3 - v
    return (b(y) - b(x)) * (x - y), 1.0 + x * x + y * y
