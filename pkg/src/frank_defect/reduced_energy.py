"""Reduced energy of equivariant liftings and the identities built around it.

For ``u = sin(psi) e_phi_perp + cos(psi) e_3`` the energy in the unit ball is
``J[psi]``: a bulk integral over ``D = (0, 1) x (0, pi)`` of four terms
weighted by ``r^2 sin(theta)`` plus a boundary integral at ``r = 1``.  This
module evaluates ``J``, its Euler-Lagrange residuals, the first integral of
the profile equation, the boundary identity that converts the cross term into
a trace, and the completed-square form that exhibits minimality.  Direct 3D
quadrature of the Frank density is included as an independent check.

Sign of the boundary term
-------------------------
``BOUNDARY_SIGN = -1``.  Converting the splay cross term with the boundary
identity gives ``-k1 pi int [(psi - sin psi cos psi) cos theta -
sin^2 psi sin theta] dtheta``; for the hedgehog the bulk part is ``4 pi k1``
and the bracket integrates to ``-4``, so only ``-1`` reproduces the direct
value ``8 pi k1``.  :func:`calibrate_boundary_sign` redoes this comparison
numerically.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .director import spherical_to_cartesian
from .errors import IntegrabilityError, PreconditionError, QuadratureError
from .frank_core import FrankConstants, K4Convention, energy_density_batch
from .lifting import RadialLifting
from .quadrature import axis_tail_ratio, composite_gauss, theta_rule

BOUNDARY_SIGN = -1
_AXIS_RATIO_LIMIT = 0.45


# --- grids --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Tensor Gauss grid on D plus a separate theta rule for the trace at ``r = 1``.

    ``weights`` are plain ``dr dtheta`` weights; integrands carry their own
    ``r^2 sin(theta)`` factors.
    """

    r: np.ndarray
    wr: np.ndarray
    theta: np.ndarray
    wt: np.ndarray
    boundary_theta: np.ndarray
    boundary_w: np.ndarray
    levels: int

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.wr, self.wt)

    @property
    def mesh(self):
        return np.meshgrid(self.r, self.theta, indexing="ij")

    def metadata(self) -> dict:
        return {
            "n_r": int(self.r.size),
            "n_theta": int(self.theta.size),
            "n_boundary": int(self.boundary_theta.size),
            "levels": self.levels,
        }


def make_grid(
    n_r: int = 8,
    r_breaks=(0.0, 0.5, 1.0),
    n_theta: int = 10,
    levels: int = 22,
    theta_breaks=(),
    n_boundary: int = 16,
) -> Grid2D:
    """Composite Gauss grid; add breakpoints where integrands have kinks."""
    r, wr, _ = composite_gauss(r_breaks, n_r)
    th, wt, _ = theta_rule(n_theta, levels, theta_breaks)
    bth, bw, _ = theta_rule(n_boundary, levels, theta_breaks)
    return Grid2D(r, wr, th, wt, bth, bw, levels)


# --- energy -------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyBreakdown:
    bulk_rr: float
    bulk_tt: float
    bulk_cross: float
    bulk_singular: float
    boundary: float
    total: float
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)


def _angles(s, theta):
    d = s.psi - theta
    sn, cs = np.sin(d), np.cos(d)
    return sn, cs


def bulk_densities(s, r, theta, k1, k3):
    """The four bulk integrands of ``J`` including the ``r^2 sin(theta)`` weight.

    Returns ``(rr, tt, cross, singular)`` without the overall factor ``pi``.
    """
    sn, cs = _angles(s, theta)
    st = np.sin(theta)
    big_l = k1 * sn**2 + k3 * cs**2
    big_k = k1 * cs**2 + k3 * sn**2
    rr = big_l * s.psi_r**2 * r**2 * st
    tt = big_k * s.psi_theta**2 * st
    cross = -2.0 * (k1 - k3) * sn * cs * s.psi_r * s.psi_theta * r * st
    singular = k1 * s.chi**2 * st
    return rr, tt, cross, singular


def boundary_integrand(psi, theta):
    """``(psi - sin psi cos psi) cos theta - sin^2 psi sin theta``."""
    return (psi - np.sin(psi) * np.cos(psi)) * np.cos(theta) - np.sin(psi) ** 2 * np.sin(theta)


def boundary_term(trace_psi, theta, w, k1, sign=BOUNDARY_SIGN):
    return sign * k1 * math.pi * float(np.sum(w * boundary_integrand(trace_psi, theta)))


def _check_axis(contrib, theta, levels, what, error=QuadratureError):
    ratio, outer = axis_tail_ratio(contrib, theta, levels)
    total = float(np.sum(np.abs(contrib)))
    if outer > 1e-12 * max(total, 1.0) and ratio > _AXIS_RATIO_LIMIT:
        raise error(
            f"{what} does not decay at the axis; the integral diverges",
            axis_ratio=ratio,
            axis_mass=outer,
        )


def reduced_energy(lifting, k1, k3, grid: Grid2D | None = None, sign=BOUNDARY_SIGN):
    """``J[psi]`` split into its four bulk terms and the boundary term."""
    grid = make_grid() if grid is None else grid
    rr_, th_ = grid.mesh
    s = lifting.sample(rr_, th_)
    rr, tt, cross, singular = bulk_densities(s, rr_, th_, k1, k3)
    w = grid.weights
    _check_axis(w * (tt + singular), grid.theta, grid.levels, "reduced energy integrand")
    trace = lifting.trace(grid.boundary_theta)
    bdy = boundary_term(trace, grid.boundary_theta, grid.boundary_w, k1, sign)
    parts = [math.pi * float(np.sum(w * v)) for v in (rr, tt, cross, singular)]
    meta = dict(grid.metadata(), sigma=sign)
    return EnergyBreakdown(*parts, bdy, sum(parts) + bdy, meta)


def direct_energy(field, k: FrankConstants, grid: Grid2D | None = None, n_phi: int = 8) -> float:
    """``int_B W(u, grad u) dx`` by spherical quadrature with a difference gradient.

    Independent of the reduction: it never uses the lifting, only the
    Cartesian field.  Raises :class:`IntegrabilityError` if the integrand
    does not decay at the axis.
    """
    grid = make_grid(n_r=4) if grid is None else grid
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    r, th, ph = np.meshgrid(grid.r, grid.theta, phi, indexing="ij")
    pts = spherical_to_cartesian(r, th, ph).reshape(-1, 3)
    u = field(pts)
    # steps shrink with the distance to the axis so that axis layers, and any
    # blow-up there, are resolved rather than smoothed over by the stencil
    grad = field.gradient(pts, h=(1e-4 * r * np.sin(th)).ravel())
    dens = energy_density_batch(u, grad, k).reshape(r.shape)
    contrib = dens * r**2 * np.sin(th) * grid.weights[..., None]
    contrib = contrib.sum(axis=2) * (2.0 * math.pi / n_phi)
    _check_axis(contrib, grid.theta, grid.levels, "energy density", IntegrabilityError)
    return float(np.sum(contrib))


def calibrate_boundary_sign(k1: float = 1.0) -> int:
    """Pick the boundary sign that makes ``J`` of the hedgehog equal its direct energy."""
    from .director import hedgehog
    from .profile_ode import identity_profile

    grid = make_grid(n_r=4)
    target = direct_energy(hedgehog(), FrankConstants(k1, k1, k1), grid)
    lift = RadialLifting(identity_profile())
    errs = {s: abs(reduced_energy(lift, k1, k1, grid, sign=s).total - target) for s in (1, -1)}
    return min(errs, key=errs.get)


# --- boundary identity for (A, B) pairs ------------------------------------------


def splay_pair():
    """``A = -sin(s - theta) sin s``, ``B = cos(s - theta) sin s`` (the splay cross term)."""

    def a(s, theta):
        return -np.sin(s - theta) * np.sin(s)

    def b(s, theta):
        return np.cos(s - theta) * np.sin(s)

    return a, b


def minimality_pair(k1, k3):
    """The pair that absorbs the linear terms of the completed square."""

    def a(s, theta):
        d = s - theta
        sn, cs = np.sin(d), np.cos(d)
        return -(k1 - k3) * sn * cs / np.sqrt(k1 * cs**2 + k3 * sn**2) * np.sin(s)

    def b(s, theta):
        d = s - theta
        sn, cs = np.sin(d), np.cos(d)
        weight = (k1 * k3 + (k1 - k3) ** 2 * sn**2 * cs**2) / (k1 * sn**2 + k3 * cs**2)
        return weight / np.sqrt(k1 * cs**2 + k3 * sn**2) * np.sin(s)

    return a, b


def check_pair(a, b, n: int = 64, seed: int = 0, tol: float = 1e-10) -> float:
    """Largest ``|d_theta B + A|`` at random points (complex-step derivative).

    Raises :class:`PreconditionError` above ``tol``.
    """
    rng = np.random.default_rng(seed)
    s = rng.uniform(-math.pi, 2 * math.pi, n)
    th = rng.uniform(0.0, math.pi, n)
    h = 1e-30
    db = np.imag(b(s.astype(complex), th + 1j * h)) / h
    defect = float(np.max(np.abs(db + a(s, th))))
    if defect > tol:
        raise PreconditionError(f"d_theta B != -A (defect {defect:.3e})")
    return defect


def abcd_boundary_value(a, b, trace, j: int, n_theta: int = 10, levels: int = 22, check=True):
    """``int_0^pi int_0^{psi(1,theta)} A ds dtheta + int_0^{j pi} B(s, pi) ds``.

    ``trace`` maps theta to ``psi(1, theta)``.  Inner integrals use adaptive
    quadrature because their upper limit changes from node to node.
    """
    if check:
        check_pair(a, b)
    th, w, _ = theta_rule(n_theta, levels)
    upper = np.asarray(trace(th), dtype=float)
    inner = np.array(
        [
            integrate.quad(lambda s, t=t: float(a(s, t)), 0.0, u, epsabs=1e-12, epsrel=1e-12)[0]
            for t, u in zip(th, upper)
        ]
    )
    tail = integrate.quad(
        lambda s: float(b(s, math.pi)), 0.0, j * math.pi, epsabs=1e-12, epsrel=1e-12, limit=200
    )[0]
    return float(np.sum(w * inner)) + tail


def abcd_left_side(a, b, lifting, grid: Grid2D | None = None) -> float:
    """``int_D [r A(psi, theta) psi_r + B(psi, theta) psi_theta] dtheta dr`` on a grid."""
    grid = make_grid() if grid is None else grid
    r, th = grid.mesh
    s = lifting.sample(r, th)
    integrand = r * a(s.psi, th) * s.psi_r + b(s.psi, th) * s.psi_theta
    return float(np.sum(grid.weights * integrand))


# --- Euler-Lagrange residuals --------------------------------------------------


def _d_dx(func, x, h=5e-3):
    return (func(x - 2 * h) - 8 * func(x - h) + 8 * func(x + h) - func(x + 2 * h)) / (12 * h)


def el_residual_profile(profile, k1, k3):
    """Residual function of the r-independent equation

        d/dtheta [sin(theta) sqrt(K) psi'] - k1 csc(theta) K^{-1/2} sin(psi) cos(psi).

    The derivative is taken in ``x = ln tan(theta/2)`` (where profiles vary
    on unit scales even inside axis boundary layers) and converted with
    ``dtheta/dx = sin(theta)``.
    """

    def flux(x):
        th = 2.0 * np.arctan(np.exp(x))
        psi, dpsi, _ = profile.evaluate(th)
        d = psi - th
        big_k = k1 * np.cos(d) ** 2 + k3 * np.sin(d) ** 2
        return np.sin(th) * np.sqrt(big_k) * dpsi

    def residual(theta):
        theta = np.asarray(theta, dtype=float)
        x = np.log(np.tan(0.5 * theta))
        psi, _, _ = profile.evaluate(theta)
        d = psi - theta
        big_k = k1 * np.cos(d) ** 2 + k3 * np.sin(d) ** 2
        bracket = _d_dx(flux, x) - k1 * np.sin(psi) * np.cos(psi) / np.sqrt(big_k)
        return bracket / np.sin(theta)

    return residual


def el_residual_2d(lifting, k1, k3, r, theta, h_r=1e-3, h_theta=1e-3):
    """Divergence-form residual of the (r, theta) Euler-Lagrange equation.

    ``-d_r P_r - d_theta P_theta + S`` with the fluxes and source of the
    reduced energy; derivatives by fourth-order differences with steps
    ``h_r * r`` and ``h_theta * min(theta, pi - theta, 1)``.
    """
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    dk = k1 - k3

    def pieces(rv, tv):
        s = lifting.sample(rv, tv)
        sn, cs = np.sin(s.psi - tv), np.cos(s.psi - tv)
        big_l = k1 * sn**2 + k3 * cs**2
        big_k = k1 * cs**2 + k3 * sn**2
        st = np.sin(tv)
        p_r = rv**2 * st * big_l * s.psi_r - dk * rv * st * sn * cs * s.psi_theta
        p_t = st * big_k * s.psi_theta - dk * rv * st * sn * cs * s.psi_r
        src = (
            dk * sn * cs * (s.psi_r**2 * rv**2 - s.psi_theta**2) * st
            - dk * rv * (cs**2 - sn**2) * s.psi_r * s.psi_theta * st
            + k1 * s.chi * np.cos(s.psi)
        )
        return p_r, p_t, src

    hr = h_r * r
    ht = h_theta * np.minimum(np.minimum(theta, np.pi - theta), 1.0)
    c = (1.0, -8.0, 8.0, -1.0)
    offs = (-2.0, -1.0, 1.0, 2.0)
    d_pr = sum(ci * pieces(r + o * hr, theta)[0] for ci, o in zip(c, offs)) / (12.0 * hr)
    d_pt = sum(ci * pieces(r, theta + o * ht)[1] for ci, o in zip(c, offs)) / (12.0 * ht)
    return -d_pr - d_pt + pieces(r, theta)[2]


def el_residual_2d_l2(lifting, k1, k3, grid: Grid2D | None = None) -> float:
    """Discrete L^2 norm over D of :func:`el_residual_2d`."""
    grid = make_grid(n_r=4, levels=16) if grid is None else grid
    r, th = grid.mesh
    res = el_residual_2d(lifting, k1, k3, r, th)
    return float(np.sqrt(np.sum(grid.weights * res**2)))


def first_integral(profile, k1, k3, theta=None):
    """``sin^2(theta) K psi'^2 - k1 sin^2(psi)`` at ``theta`` (default: interior nodes).

    Written as ``sin^2(theta) (K psi'^2 - k1 chi^2)`` so it stays accurate at
    the axis.
    """
    if theta is None:
        theta = np.asarray(profile.theta_nodes)[1:-1]
    theta = np.asarray(theta, dtype=float)
    psi, dpsi, chi = profile.evaluate(theta)
    d = psi - theta
    big_k = k1 * np.cos(d) ** 2 + k3 * np.sin(d) ** 2
    return np.sin(theta) ** 2 * (big_k * dpsi**2 - k1 * chi**2)


# --- completed square -----------------------------------------------------------


def deficit_densities(s, r, theta, k1, k3):
    """The two squares of the completed-square form, with ``r^2 sin(theta)``."""
    sn, cs = _angles(s, theta)
    st = np.sin(theta)
    big_l = k1 * sn**2 + k3 * cs**2
    big_k = k1 * cs**2 + k3 * sn**2
    q = s.psi_theta - math.sqrt(k1) * s.chi / np.sqrt(big_k)
    radial = s.psi_r * r - (k1 - k3) * sn * cs / big_l * q
    # radial = r * [psi_r - (k1 - k3)/r * (sn cs / L) q]; r^2 absorbed below
    rr = big_l * radial**2 * st
    tt = k1 * k3 / big_l * q**2 * st
    return rr, tt


def completed_square_energy(lifting, k1, k3, profile, grid: Grid2D | None = None, trace_tol=1e-8):
    """``(deficit_rr, deficit_tt, constant_part)`` with ``J = deficits + constant_part``.

    ``profile`` is the solved profile whose trace the lifting must share at
    ``r = 1``; ``constant_part`` depends on that trace only and equals
    ``J[psi_t]``.
    """
    grid = make_grid() if grid is None else grid
    bth = grid.boundary_theta
    trace = lifting.trace(bth)
    mismatch = float(np.max(np.abs(trace - profile.evaluate(bth)[0])))
    if mismatch > trace_tol:
        raise PreconditionError(f"trace at r = 1 differs from the profile by {mismatch:.3e}")
    r, th = grid.mesh
    s = lifting.sample(r, th)
    rr, tt = deficit_densities(s, r, th, k1, k3)
    w = grid.weights
    deficit_rr = math.pi * float(np.sum(w * rr))
    deficit_tt = math.pi * float(np.sum(w * tt))
    constant = minimality_constant(profile, k1, k3, grid)
    return deficit_rr, deficit_tt, constant


def minimality_constant(profile, k1, k3, grid: Grid2D | None = None) -> float:
    """Trace-only part of the completed square for the class with degree one."""
    grid = make_grid() if grid is None else grid
    bth, bw = grid.boundary_theta, grid.boundary_w
    trace = profile.evaluate(bth)[0]
    a, b = minimality_pair(k1, k3)
    pair = abcd_boundary_value(a, b, lambda t: profile.evaluate(t)[0], 1)
    return boundary_term(trace, bth, bw, k1) + 2.0 * math.sqrt(k1) * math.pi * pair


def constants_minus_k2(k1, k2, k3) -> FrankConstants:
    return FrankConstants(k1, k2, k3, K4Convention.MINUS_K2)
