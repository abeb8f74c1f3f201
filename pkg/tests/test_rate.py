import numpy as np
import pytest

from chldp.model import linear_coefficients, make_coefficients
from chldp.rate import (ReducedProblem, TranscriptionProblem, convergence_scan,
                        gamma_limsup_probe, gramian_continuous_time, gramian_continuum,
                        gramian_discrete_time, linear_rate, m_for_n, minimize_rate, path_objective,
                        rate_at_y0, rate_curve, tent)
from chldp.skeleton import SpaceTimePath, deterministic_path, rate_functional, skeleton_forward
from chldp.timestep import StepOperators

from oracles import dense_lq_gramian, dense_lq_min_norm

DEFAULT = make_coefficients(u0_params=[2.0, 0.1])
LIN = linear_coefficients()


def fd_check(fun, x, rng, steps=4, h=1e-6):
    worst = 0.0
    _, g = fun(x)
    for _ in range(steps):
        d = rng.standard_normal(x.size)
        fp, _ = fun(x + h * d)
        fm, _ = fun(x - h * d)
        fd = (fp - fm) / (2 * h)
        an = g @ d
        worst = max(worst, abs(fd - an) / max(abs(an), abs(fd), 1e-12))
    return worst


def test_gramian_matches_dense_lq():
    for xbar in (0.3, 1.0, np.pi / 2):
        n, m, T = 2, 16, 0.5
        v = gramian_discrete_time(n, m, T, xbar)
        assert v == pytest.approx(dense_lq_gramian(n, m, T, xbar), rel=1e-10)
        assert linear_rate(1.3, v) == pytest.approx(dense_lq_min_norm(n, m, T, xbar, 1.3), rel=1e-8)


def test_discrete_gramian_tends_to_continuous_time():
    a = gramian_continuous_time(4, 0.5, 1.0)
    errs = [abs(gramian_discrete_time(4, m, 0.5, 1.0) - a) for m in (64, 256, 1024)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3 * a


def test_continuum_gramian_zero_mode_and_truncation():
    # j = 0 term alone is T/pi; the tail beyond J is below 1/(3 pi J^3)
    v = gramian_continuum(0.5, 1.0, J=512)
    assert v > 0.5 / np.pi
    assert abs(v - gramian_continuum(0.5, 1.0, J=1024)) < 1 / (3 * np.pi * 512**3)


def test_raw_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    for n, m in ((4, 8), (8, 32)):
        prob = TranscriptionProblem(DEFAULT, n, m, 0.5, 1.0, 0.4)
        base = prob.free_from_path(deterministic_path(DEFAULT, n, m, 0.5).values)
        for _ in range(3):
            x = base + 0.05 * rng.standard_normal(prob.size)
            assert fd_check(prob.objective_and_gradient, x, rng) < 1e-5


def test_reduced_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    for n, m in ((4, 8), (8, 32)):
        prob = ReducedProblem(DEFAULT, n, m, 0.5, 1.0, 0.4)
        for _ in range(3):
            z = prob.warm_start() + 0.3 * rng.standard_normal(m * n)
            assert fd_check(prob.objective_and_gradient, z, rng) < 1e-5


def test_assembled_path_hits_constraint_and_matches_rate_functional():
    prob = TranscriptionProblem(DEFAULT, 8, 16, 0.5, 1.0, 0.4)
    rng = np.random.default_rng(2)
    base = prob.free_from_path(deterministic_path(DEFAULT, 8, 16, 0.5).values)
    F = prob.assemble(base + 0.01 * rng.standard_normal(prob.size))
    path = SpaceTimePath(F, 0.5)
    assert path.terminal_value(1.0) == pytest.approx(0.4, abs=1e-13)
    val, _ = prob.objective_and_gradient(prob.free_from_path(F))
    assert val == pytest.approx(rate_functional(DEFAULT, path, 0.4, 1.0), rel=1e-12)


def test_stationary_at_deterministic_path():
    n, m, T = 8, 32, 0.5
    F = deterministic_path(DEFAULT, n, m, T).values
    val, g, _ = path_objective(DEFAULT, StepOperators(n, T / m), F)
    assert val < 1e-24 and np.max(np.abs(g)) < 1e-10


def test_ramp_family_gradient_contraction():
    c0, T, n, m = 0.2, 0.5, 8, 16
    coeffs = make_coefficients(u0="constant", u0_params=[c0])
    t = np.linspace(0, T, m + 1)[:, None]
    for d in (0.3, -1.1):
        F = np.broadcast_to(c0 + d * t, (m + 1, n)).copy()
        val, g, _ = path_objective(coeffs, StepOperators(n, T / m), F)
        assert val == pytest.approx(0.5 * d * d * T * np.pi, rel=1e-12)
        assert np.sum(g * np.broadcast_to(t, F.shape)) == pytest.approx(d * T * np.pi, rel=1e-10)


def test_barrier_when_sigma_vanishes():
    from chldp.model import Coefficients
    c = Coefficients(lambda x: 0 * x, lambda x: 0 * x, lambda x: x, lambda x: 1 + 0 * x,
                     lambda x: np.cos(x))
    F = np.zeros((5, 4))
    val, g, h = path_objective(c, StepOperators(4, 0.1), F)
    assert h is None and val >= 1e12


def test_rate_at_y0_is_zero():
    for coeffs in (DEFAULT, LIN):
        y0 = rate_at_y0(coeffs, 8, 32, 0.5, 1.0)
        r = minimize_rate(coeffs, 8, 32, 0.5, 1.0, y0)
        assert r.value <= 1e-10 and r.converged


def test_linear_rate_matches_gramian():
    n, m, T, xbar = 8, 64, 0.5, 1.0
    v = gramian_discrete_time(n, m, T, xbar)
    for y in (0.5, 1.0, 2.0):
        r = minimize_rate(LIN, n, m, T, xbar, y)
        assert r.value == pytest.approx(linear_rate(y, v), rel=1e-6)
        assert r.converged


def test_result_self_consistency():
    y0 = rate_at_y0(DEFAULT, 8, 64, 0.5, 1.0)
    r = minimize_rate(DEFAULT, 8, 64, 0.5, 1.0, y0 + 0.5)
    assert r.converged
    assert 0.5 * r.control.norm2() == pytest.approx(r.value, rel=1e-8)
    assert r.residual < 1e-9
    assert skeleton_forward(DEFAULT, r.control).terminal_value(1.0) == pytest.approx(y0 + 0.5, abs=1e-9)


def test_edge_xbar_snaps_to_end_node():
    r = minimize_rate(LIN, 4, 16, 0.5, 0.0, 0.5)
    assert r.path.values[-1, 0] == pytest.approx(0.5, abs=1e-12)
    v = gramian_discrete_time(4, 16, 0.5, 0.0)
    assert r.value == pytest.approx(linear_rate(0.5, v), rel=1e-6)


def test_time_refinement_differences_shrink():
    n, T, xbar = 8, 0.5, 1.0
    y = rate_at_y0(DEFAULT, n, 512, T, xbar) + 0.5
    vals = [minimize_rate(DEFAULT, n, m, T, xbar, y).value for m in (32, 64, 128, 256)]
    d = np.abs(np.diff(vals))
    assert d[0] > d[1] > d[2]
    assert d[1] / d[2] >= 2.0


def test_rate_curve_properties():
    n, m, T, xbar = 8, 64, 0.5, 1.0
    y0 = rate_at_y0(LIN, n, m, T, xbar)
    single = rate_curve(LIN, n, m, T, xbar, [y0])
    assert len(single) == 1 and single[0].value <= 1e-10
    ys = [-1.0, -0.5, 0.0, 0.5, 1.0]
    curve = rate_curve(LIN, n, m, T, xbar, ys)
    v = gramian_discrete_time(n, m, T, xbar)
    for r in curve:
        assert r.value >= 0
        assert r.value == pytest.approx(linear_rate(r.y, v), rel=1e-2, abs=1e-10)
    assert curve[2].value <= 1e-10
    assert curve[0].inf_above == pytest.approx(0.0, abs=1e-10)
    assert curve[3].inf_above == pytest.approx(curve[3].value)


def test_convergence_scan_single_and_m_rule():
    assert m_for_n(16) == 256 and m_for_n(8) == 64
    rows = convergence_scan(LIN, [8], 0.5, 1.0, y_offset=0.5, m_base=32)
    assert len(rows) == 1 and rows[0].diff_to_finest == 0.0


def test_tent_shape():
    w = tent(16, 1.0)
    assert w.max() == 1.0 and w.min() >= 0.0
    assert np.sum(w == 1.0) == 3


def test_gamma_limsup_probe():
    n, m, T, xbar = 8, 32, 0.5, 1.0
    y = rate_at_y0(DEFAULT, n, m, T, xbar) + 0.5
    r = minimize_rate(DEFAULT, n, m, T, xbar, y)
    vals = gamma_limsup_probe(DEFAULT, r, xbar, factors=(2,))
    assert vals[0] <= 1.05 * r.value
