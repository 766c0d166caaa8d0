import math

import numpy as np
import pytest

from _support import profile
from frank_defect.errors import DomainError, IterationError, PreconditionError
from frank_defect.lifting import AnalyticLifting, RadialLifting, SumLifting
from frank_defect.quadrature import composite_gauss, theta_rule
from frank_defect.variational import (
    Perturbation,
    RitzBasis,
    RitzField,
    _Objective,
    axis_trace_check,
    descent_minimize,
    make_perturbation,
    minimality_probe,
    probe_deficit,
    probe_report,
    x0_norm,
)

PI = math.pi
EPS = (-0.1, -0.01, 0.01, 0.1)


# --- perturbations ------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_perturbation_normalised(seed):
    phi = make_perturbation(seed)
    assert phi.x0_norm() == pytest.approx(1.0, rel=1e-12)
    # the norm is resolved: refining the panels leaves it unchanged
    assert x0_norm(phi, refine=2) == pytest.approx(1.0, rel=1e-10)


def test_perturbation_is_seeded():
    a, b = make_perturbation(12), make_perturbation(12)
    assert a.support == b.support and np.array_equal(a.coeffs, b.coeffs)
    assert make_perturbation(13).support != a.support


def test_perturbation_vanishes_outside_support():
    phi = make_perturbation(2)
    r0, r1, t0, t1 = phi.support
    r = np.array([0.5 * r0, r0, r1, 0.5 * (r1 + 1.0), 1.0])
    for th in (0.5 * t0, t0, t1, 0.5 * (t1 + PI)):
        values = phi.sample(r, np.full_like(r, th))
        assert all(np.all(v == 0.0) for v in values)


def test_perturbation_derivatives_match_finite_differences():
    phi = make_perturbation(4, n_modes=9)
    r0, r1, t0, t1 = phi.support
    r = np.linspace(r0, r1, 9)[1:-1]
    th = np.linspace(t0, t1, 9)[1:-1]
    rr, tt = np.meshgrid(r, th, indexing="ij")
    _, pr, pt = phi.sample(rr, tt)
    h = 1e-6
    fd_r = (phi.sample(rr + h, tt)[0] - phi.sample(rr - h, tt)[0]) / (2 * h)
    fd_t = (phi.sample(rr, tt + h)[0] - phi.sample(rr, tt - h)[0]) / (2 * h)
    assert np.max(np.abs(pr - fd_r)) < 1e-6 and np.max(np.abs(pt - fd_t)) < 1e-6


@pytest.mark.parametrize(
    "support",
    [(0.5, 0.5, 1.0, 2.0), (0.0, 0.5, 1.0, 2.0), (0.2, 0.5, 1.0, PI), (0.2, 1.2, 1.0, 2.0)],
)
def test_degenerate_support_rejected(support):
    with pytest.raises(DomainError):
        make_perturbation(0, support=support)


@pytest.mark.parametrize("n_modes", [0, 10])
def test_mode_count_checked(n_modes):
    with pytest.raises(DomainError):
        make_perturbation(0, n_modes=n_modes)


def test_probe_requires_interior_support():
    phi = make_perturbation(0)
    touching = Perturbation((0.2, 1.0, 1.0, 2.0), phi.coeffs, 1.0, 0)
    with pytest.raises(PreconditionError):
        minimality_probe(profile(4.0, 1.0, 1.0), touching, [0.1])


# --- minimality probes -------------------------------------------------------------------


@pytest.mark.parametrize("k", [(1.0, 1.0), (4.0, 1.0), (1.0, 4.0)])
@pytest.mark.parametrize("t", [0.6, PI / 2, 2.4])
def test_probe_nonnegative_and_equals_deficit(k, t):
    p = profile(k[0], k[1], t)
    for seed in range(4):
        phi = make_perturbation(seed)
        for eps, dj in minimality_probe(p, phi, EPS):
            assert dj >= -1e-10
            assert abs(dj - probe_deficit(p, phi, eps)) < 1e-8


def test_probe_is_quadratic_at_small_amplitude():
    p = profile(4.0, 1.0, 1.0)
    phi = make_perturbation(5)
    eps = 1e-3
    (_, minus), (_, zero), (_, plus) = minimality_probe(p, phi, [-eps, 0.0, eps])
    assert zero == 0.0
    # first variation vanishes at a critical point, second is positive
    first = (plus - minus) / (2 * eps)
    second = (plus + minus) / eps**2
    assert abs(first) < 1e-6 * second
    assert second > 0


def test_probe_report_json():
    import json

    p = profile(4.0, 1.0, 1.0)
    rows = json.loads(probe_report(p, [make_perturbation(0), make_perturbation(1)], [0.1, -0.1]))
    assert len(rows) == 4
    assert {row["seed"] for row in rows} == {0, 1}
    assert all(row["x0_norm"] == pytest.approx(1.0) for row in rows)


# --- Ritz space -----------------------------------------------------------------------


def test_ritz_members_vanish_on_boundary_and_axis():
    basis = RitzBasis()
    r = np.linspace(0.0, 1.0, 11)
    for th in (0.0, PI):
        eta, _, _, _ = basis.functions(r, np.full_like(r, th))
        assert np.max(np.abs(eta)) < 1e-15
    th = np.linspace(0.0, PI, 13)
    eta, _, _, _ = basis.functions(np.ones_like(th), th)
    assert np.max(np.abs(eta)) == 0.0


def test_ritz_derivatives_match_finite_differences():
    basis = RitzBasis(4, 5)
    r = np.linspace(0.1, 0.9, 7)
    th = np.linspace(0.3, 2.8, 7)
    eta, er, et, ratio = basis.functions(r, th)
    h = 1e-6
    fd_r = (basis.functions(r + h, th)[0] - basis.functions(r - h, th)[0]) / (2 * h)
    fd_t = (basis.functions(r, th + h)[0] - basis.functions(r, th - h)[0]) / (2 * h)
    assert np.max(np.abs(er - fd_r)) < 1e-7 and np.max(np.abs(et - fd_t)) < 1e-7
    assert np.allclose(ratio * np.sin(th), eta, atol=1e-15)


def test_objective_gradient_matches_complex_step():
    p = profile(2.0, 1.0, 1.0)
    basis = RitzBasis(3, 4)
    r, wr, _ = composite_gauss((0.0, 0.5, 1.0), 8)
    th, wt, _ = theta_rule(8, 10)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    obj = _Objective(p, basis, rr, tt, np.outer(wr, wt))
    a = np.random.default_rng(0).normal(scale=0.1, size=basis.size)
    val, grad = obj(a)
    h = 1e-30
    cs = np.empty_like(grad)
    for i in range(a.size):
        step = a.astype(complex)
        step[i] += 1j * h
        cs[i] = np.imag(obj._value(*obj.combine(step))) / h
    assert float(np.real(obj._value(*obj.combine(a)))) == pytest.approx(val, rel=1e-14)
    assert np.max(np.abs(grad - cs)) < 1e-10 * max(1.0, np.max(np.abs(cs)))


# --- descent ---------------------------------------------------------------------------


def test_descent_stationary_start():
    res = descent_minimize(profile(2.0, 1.0, 1.0))
    assert res.iterations == 0
    assert res.max_deviation == 0.0 and abs(res.energy_gap) < 1e-12


@pytest.mark.parametrize("seed", [0, 3])
def test_descent_returns_to_profile(seed):
    p = profile(2.0, 1.0, 1.0)
    start = SumLifting(RadialLifting(p), make_perturbation(seed), 0.3)
    res = descent_minimize(p, start)
    assert res.iterations > 0
    assert res.max_deviation < 1e-6 and res.r_variation < 1e-6
    assert abs(res.energy_gap) < 1e-10


def test_descent_from_hedgehog_profile():
    p = profile(4.0, 1.0, 1.0)
    start = AnalyticLifting(lambda r, t: t, lambda r, t: 0 * t, lambda r, t: 1 + 0 * t)
    res = descent_minimize(p, start)
    assert res.max_deviation < 1e-6


def test_descent_iteration_limit():
    p = profile(4.0, 1.0, 1.0)
    start = SumLifting(RadialLifting(p), make_perturbation(0), 0.5)
    with pytest.raises(IterationError) as info:
        descent_minimize(p, start, max_iters=1)
    assert info.value.diagnostics["grad_norm"] > 0


def test_ritz_field_sample_shapes():
    basis = RitzBasis()
    field = RitzField(basis, np.ones(basis.size))
    r = np.linspace(0, 1, 5)
    th = np.linspace(0, PI, 5)
    assert all(v.shape == (5,) for v in field.sample(r, th))
    rr, tt = np.meshgrid(r, th, indexing="ij")
    assert all(v.shape == (5, 5) for v in field.sample(rr, tt))


# --- axis trace ----------------------------------------------------------------------------


def test_axis_trace_admissible():
    p = profile(2.0, 1.0, 1.0)
    res = descent_minimize(p, SumLifting(RadialLifting(p), make_perturbation(1), 0.3))
    for lift in (RadialLifting(p), res.lifting):
        t0, tpi = axis_trace_check(lift)
        assert t0 < 1e-10 and tpi < 1e-10


def test_axis_trace_detects_bad_axis_value():
    lift = AnalyticLifting(lambda r, t: 0.5 * t + 0.3, lambda r, t: 0 * t, lambda r, t: 0.5 + 0 * t)
    t0, tpi = axis_trace_check(lift)
    assert t0 > 0.05 and tpi > 0.05
