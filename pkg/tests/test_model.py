import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chldp.model import (CUBIC_LIP_C0, Coefficients, cubic_drift_bounds, make_coefficients,
                         u0_polynomial, validate_assumptions)

finite = st.floats(-50, 50, allow_nan=False)


def test_default_coefficients_pass():
    c = make_coefficients(b="cubic", sigma="one", u0="cos", u0_params=[1.0])
    rep = validate_assumptions(c)
    assert rep.all_passed
    assert rep.min_abs_sigma == 1.0


def test_identity_sigma_fails_bounded_and_nondegenerate():
    z = lambda x: np.zeros_like(x)
    c = Coefficients(lambda x: x**3 - x, lambda x: 3 * x**2 - 1, lambda x: x,
                     lambda x: np.ones_like(x), lambda x: np.cos(x))
    rep = validate_assumptions(c)
    assert rep["sigma_lipschitz"].passed
    assert not rep["sigma_bounded"].passed
    assert not rep["sigma_nondegenerate"].passed
    assert not rep.all_passed


def test_shifted_sine_min_sigma():
    c = make_coefficients(sigma="shifted_sine", sigma_param=2.0, u0="cos", u0_params=[2.0])
    rep = validate_assumptions(c)
    assert rep.all_passed
    # grid scan oracle over [-10, 10]
    x = np.linspace(-10, 10, 10_000)
    assert rep.min_abs_sigma == pytest.approx(np.min(np.abs(2 + np.sin(x))), abs=1e-15)
    assert rep.min_abs_sigma == pytest.approx(1.0, abs=1e-4)


def test_tanh_clamp_bounded_and_lipschitz():
    rep = validate_assumptions(make_coefficients(sigma="tanh_clamp", sigma_param=0.5))
    assert rep.all_passed
    assert rep.sigma_lipschitz == pytest.approx(0.5, rel=1e-3)


def test_non_finite_evaluation_is_hard_error():
    c = Coefficients(lambda x: x, lambda x: 1 + 0 * x, lambda x: 1 / (x - x), lambda x: x,
                     lambda x: np.cos(x))
    with np.errstate(all="ignore"), pytest.raises(ValueError, match="non-finite"):
        validate_assumptions(c)


def test_polynomial_neumann_check():
    # u0 = x^2 (2 pi - ... ) style: p(x) = 3 pi x^2 - 2 x^3 has p'(0) = p'(pi) = 0
    u, _ = u0_polynomial([0.0, 0.0, 3 * np.pi, -2.0])
    assert u(np.pi) == pytest.approx(np.pi**3)
    with pytest.raises(ValueError, match="Neumann"):
        u0_polynomial([0.0, 1.0])


def test_fd_derivatives_match_analytic():
    a = make_coefficients(u0="cos", u0_params=[2.0, 0.3])
    fd = Coefficients(a.b, a.b_prime, a.sigma, a.sigma_prime, a.u0)
    x = np.linspace(0, np.pi, 17)
    for k in range(3):
        assert np.allclose(fd.u0_derivs[k](x), a.u0_derivs[k](x), atol=1e-6)


def test_cubic_drift_bound_examples():
    assert cubic_drift_bounds(0.0, 0.0) == (0.0, 1.0)
    assert cubic_drift_bounds(1.0, -1.0) == (0.0, 3.0)
    assert cubic_drift_bounds(2.0, 0.0) == (-12.0, 5.0)


@given(finite, finite)
def test_one_sided_bound(x, y):
    one, _ = cubic_drift_bounds(x, y)
    assert one <= (x - y) ** 2 + 1e-9 * (1 + abs(x) ** 4 + abs(y) ** 4)


@given(finite, finite)
@settings(max_examples=300)
def test_lipschitz_factor(x, y):
    _, fac = cubic_drift_bounds(x, y)
    b = lambda v: v**3 - v
    assert abs(b(x) - b(y)) <= CUBIC_LIP_C0 * fac * abs(x - y) * (1 + 1e-12) + 1e-12


def test_unknown_names_rejected():
    with pytest.raises(ValueError):
        make_coefficients(b="quartic")
    with pytest.raises(ValueError):
        make_coefficients(sigma="exp")
