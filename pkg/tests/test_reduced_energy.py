import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from _support import PARAM_GRID, param_id, profile
from frank_defect.director import build_director, build_director_2d, hedgehog
from frank_defect.errors import IntegrabilityError, PreconditionError, QuadratureError
from frank_defect.frank_core import FrankConstants, K4Convention
from frank_defect.lifting import AnalyticLifting, RadialLifting, SumLifting
from frank_defect.profile_ode import AnalyticProfile, identity_profile
from frank_defect.reduced_energy import (
    BOUNDARY_SIGN,
    abcd_boundary_value,
    abcd_left_side,
    calibrate_boundary_sign,
    check_pair,
    completed_square_energy,
    direct_energy,
    el_residual_2d,
    el_residual_2d_l2,
    el_residual_profile,
    first_integral,
    make_grid,
    minimality_pair,
    reduced_energy,
    splay_pair,
)
from frank_defect.variational import make_perturbation

PI = math.pi


def _identity_lift():
    return RadialLifting(identity_profile())


# --- energies -----------------------------------------------------------------------


@pytest.mark.parametrize("k1", [0.5, 1.0, 2.0, 7.0])
def test_hedgehog_reduced_energy(k1):
    br = reduced_energy(_identity_lift(), k1, 3.0)
    assert br.total == pytest.approx(8 * PI * k1, rel=1e-12)
    assert br.metadata["sigma"] == BOUNDARY_SIGN


@pytest.mark.parametrize("k1", [0.5, 2.0])
def test_hedgehog_direct_energy(k1):
    e = direct_energy(hedgehog(), FrankConstants(k1, 1.3, 0.4))
    assert e == pytest.approx(8 * PI * k1, rel=1e-8)
    dirichlet = direct_energy(hedgehog(), FrankConstants.one_constant(k1))
    assert dirichlet == pytest.approx(4 * PI * k1, rel=1e-8)


def test_boundary_sign_calibration():
    assert calibrate_boundary_sign() == BOUNDARY_SIGN == -1
    # the other sign is off by the whole boundary contribution
    wrong = reduced_energy(_identity_lift(), 1.0, 1.0, sign=1).total
    assert abs(wrong - 8 * PI) > 1.0


@pytest.mark.parametrize("params", PARAM_GRID[::5], ids=param_id)
def test_reduced_matches_direct(params):
    k1, k3, t = params
    p = profile(k1, k3, t)
    red = reduced_energy(RadialLifting(p), k1, k3).total
    direct = direct_energy(build_director(p), FrankConstants(k1, 1.0, k3))
    assert abs(red - direct) / direct < 1e-5


@pytest.mark.parametrize("seed", [0, 1])
def test_reduced_matches_direct_r_dependent(seed):
    k1, k3 = 4.0, 1.0
    p = profile(k1, k3, 1.0)
    phi = make_perturbation(seed)
    lift = SumLifting(RadialLifting(p), phi, 0.2)
    r0, r1, t0, t1 = phi.support
    grid = make_grid(n_r=8, r_breaks=(0.0, r0, r1, 1.0), theta_breaks=(t0, t1))
    red = reduced_energy(lift, k1, k3, grid).total
    direct = direct_energy(build_director_2d(lift), FrankConstants(k1, 1.0, k3), grid)
    assert abs(red - direct) / direct < 1e-5
    assert red > reduced_energy(RadialLifting(p), k1, k3, grid).total


def test_k2_independence():
    p = profile(4.0, 1.0, 1.0)
    field = build_director(p)
    values = [direct_energy(field, FrankConstants(4.0, k2, 1.0, K4Convention.MINUS_K2)) for k2 in (0.1, 1, 10)]
    assert max(values) - min(values) <= 1e-10 * abs(values[0])


def test_divergent_reduced_energy_detected():
    # psi = theta / 2 does not reach pi at the south pole: chi blows up there
    lift = AnalyticLifting(lambda r, t: 0.5 * t, lambda r, t: 0 * t, lambda r, t: 0.5 + 0 * t)
    with pytest.raises(QuadratureError):
        reduced_energy(lift, 1.0, 1.0)


def test_divergent_direct_energy_detected():
    lift = AnalyticLifting(lambda r, t: 0.5 * t, lambda r, t: 0 * t, lambda r, t: 0.5 + 0 * t)
    with pytest.raises(IntegrabilityError):
        direct_energy(build_director_2d(lift), FrankConstants(1, 1, 1))


def test_energy_breakdown_json():
    import json

    br = reduced_energy(_identity_lift(), 1.0, 1.0)
    payload = json.loads(br.to_json())
    assert payload["total"] == br.total
    parts = br.bulk_rr + br.bulk_tt + br.bulk_cross + br.bulk_singular + br.boundary
    assert parts == pytest.approx(br.total, rel=1e-15)


# --- boundary identity ----------------------------------------------------------------------


def test_pair_compatibility_check():
    check_pair(*splay_pair())
    check_pair(*minimality_pair(4.0, 1.0))

    def a(s, theta):
        return np.sin(s) + 0 * theta

    def b(s, theta):
        return np.cos(s) + 0 * theta

    with pytest.raises(PreconditionError):
        check_pair(a, b)
    with pytest.raises(PreconditionError):
        abcd_boundary_value(a, b, lambda th: th, 1)


def test_abcd_constant_pair():
    # A = 0, B = 1: both sides equal int_0^pi psi(1, theta)' dtheta + 0 ... = pi for psi = theta
    def a(s, theta):
        return 0.0 * s

    def b(s, theta):
        return 1.0 + 0.0 * s

    lift = _identity_lift()
    assert abcd_left_side(a, b, lift) == pytest.approx(PI, rel=1e-13)
    assert abcd_boundary_value(a, b, lambda th: th, 1) == pytest.approx(PI, rel=1e-13)


def test_abcd_splay_pair_identity_profile():
    a, b = splay_pair()
    left = abcd_left_side(a, b, _identity_lift())
    right = abcd_boundary_value(a, b, lambda th: th, 1)
    assert left == pytest.approx(2.0, rel=1e-12) and right == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("params", [(4.0, 1.0, 1.0), (0.5, 4.0, 2.4), (1.0, 1.0, 0.6)])
def test_abcd_both_pairs_for_ut(params):
    k1, k3, t = params
    p = profile(k1, k3, t)
    for a, b in (splay_pair(), minimality_pair(k1, k3)):
        left = abcd_left_side(a, b, RadialLifting(p))
        right = abcd_boundary_value(a, b, lambda th: p.evaluate(th)[0], 1)
        assert left == pytest.approx(right, rel=1e-6)


def test_abcd_j0_bump():
    bump = AnalyticLifting(
        lambda r, t: r**2 * np.sin(t) ** 2,
        lambda r, t: 2 * r * np.sin(t) ** 2,
        lambda r, t: r**2 * np.sin(2 * t),
    )
    for a, b in (splay_pair(), minimality_pair(4.0, 1.0)):
        left = abcd_left_side(a, b, bump)
        right = abcd_boundary_value(a, b, lambda th: np.sin(th) ** 2, 0)
        assert left == pytest.approx(right, rel=1e-6)
        assert abs(right) > 1e-3


# --- Euler-Lagrange residuals and first integral ----------------------------------------------


@pytest.mark.parametrize("params", PARAM_GRID, ids=param_id)
def test_el_residual_profile_small(params):
    k1, k3, t = params
    p = profile(k1, k3, t)
    res = el_residual_profile(p, k1, k3)(p.theta_nodes[1:-1])
    assert np.max(np.abs(res)) < 1e-6


def test_el_residual_profile_detects_non_solution():
    bad = AnalyticProfile(lambda t: t + 0.1 * np.sin(t), lambda t: 1 + 0.1 * np.cos(t))
    th = np.linspace(0.05, PI - 0.05, 200)
    assert np.max(np.abs(el_residual_profile(bad, 2.0, 1.0)(th))) > 1e-3


def test_el_residual_hedgehog_any_constants():
    th = np.linspace(0.01, PI - 0.01, 100)
    res = el_residual_profile(identity_profile(), 4.0, 0.3)(th)
    assert np.max(np.abs(res)) < 1e-8


@pytest.mark.parametrize("params", PARAM_GRID[::3], ids=param_id)
def test_el_residual_2d_small(params):
    k1, k3, t = params
    assert el_residual_2d_l2(RadialLifting(profile(k1, k3, t)), k1, k3) < 1e-4


def test_el_residual_2d_detects_perturbation():
    p = profile(2.0, 1.0, 1.0)
    lift = SumLifting(RadialLifting(p), make_perturbation(3), 0.1)
    r = np.array([0.5])
    th = np.linspace(0.5, 2.5, 30)
    assert np.max(np.abs(el_residual_2d(lift, 2.0, 1.0, r[:, None], th[None, :]))) > 1e-3


@pytest.mark.parametrize("params", PARAM_GRID, ids=param_id)
def test_first_integral_vanishes(params):
    k1, k3, t = params
    assert np.max(np.abs(first_integral(profile(k1, k3, t), k1, k3))) < 1e-8


@pytest.mark.parametrize("k", [(4.0, 1.0), (0.5, 2.0)])
def test_first_integral_constant_on_general_solutions(k):
    """Solutions of the second-order equation with other slopes have a non-zero constant C."""
    k1, k3 = k

    def rhs(theta, y):
        psi, flux = y
        d = psi - theta
        root_k = math.sqrt(k1 * math.cos(d) ** 2 + k3 * math.sin(d) ** 2)
        return [flux / (math.sin(theta) * root_k), k1 * math.sin(psi) * math.cos(psi) / (math.sin(theta) * root_k)]

    y0 = [1.0, 2.5]
    sol = solve_ivp(rhs, (PI / 2, 0.3), y0, rtol=1e-12, atol=1e-13, dense_output=True)
    sol2 = solve_ivp(rhs, (PI / 2, 2.8), y0, rtol=1e-12, atol=1e-13, dense_output=True)

    def pick(th):
        th = np.asarray(th, dtype=float)
        left = sol.sol(np.minimum(th, PI / 2))
        right = sol2.sol(np.maximum(th, PI / 2))
        return np.where(th <= PI / 2, left, right)

    def psi(th):
        return pick(th)[0]

    def dpsi(th):
        th = np.asarray(th, dtype=float)
        p, flux = pick(th)
        d = p - th
        return flux / (np.sin(th) * np.sqrt(k1 * np.cos(d) ** 2 + k3 * np.sin(d) ** 2))

    prof = AnalyticProfile(psi, dpsi)
    th = np.linspace(0.4, 2.7, 60)
    c = first_integral(prof, k1, k3, th)
    expected = y0[1] ** 2 - k1 * math.sin(y0[0]) ** 2
    assert abs(expected) > 0.1
    assert np.max(np.abs(c - expected)) < 1e-8
    assert np.max(np.abs(el_residual_profile(prof, k1, k3)(th))) < 1e-5


# --- completed square -----------------------------------------------------------------------


@pytest.mark.parametrize("params", [(4.0, 1.0, 1.0), (1.0, 4.0, 0.6), (0.5, 0.5, 2.4)])
def test_completed_square_for_ut(params):
    k1, k3, t = params
    p = profile(k1, k3, t)
    lift = RadialLifting(p)
    d_rr, d_tt, const = completed_square_energy(lift, k1, k3, p)
    total = reduced_energy(lift, k1, k3).total
    assert d_rr >= 0 and d_tt >= 0
    assert d_rr + d_tt < 1e-12 * total
    assert const == pytest.approx(total, rel=1e-10)


def test_completed_square_for_perturbed_field():
    k1, k3 = 4.0, 1.0
    p = profile(k1, k3, 1.0)
    phi = make_perturbation(7)
    lift = SumLifting(RadialLifting(p), phi, 0.3)
    # the bump is only C^2 at the edge of its support; put panel breaks there and
    # use enough nodes per panel for its degree-18 polynomial factors
    r0, r1, t0, t1 = phi.support
    grid = make_grid(n_r=20, n_theta=24, r_breaks=(0.0, r0, r1, 1.0), theta_breaks=(t0, t1))
    d_rr, d_tt, const = completed_square_energy(lift, k1, k3, p, grid)
    total = reduced_energy(lift, k1, k3, grid).total
    assert d_rr > 0 and d_tt > 0
    assert d_rr + d_tt + const == pytest.approx(total, rel=1e-10)


def test_completed_square_requires_matching_trace():
    p = profile(4.0, 1.0, 1.0)
    with pytest.raises(PreconditionError):
        completed_square_energy(_identity_lift(), 4.0, 1.0, p)
