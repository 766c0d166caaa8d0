"""Perturbations of the solved profile, minimality probes and energy descent."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import optimize

from .errors import DomainError, IterationError, PreconditionError
from .lifting import FieldSamples, RadialLifting, SumLifting
from .quadrature import composite_gauss, theta_rule
from .reduced_energy import bulk_densities, deficit_densities


def _bump(s, a, b):
    """Degree-6 bump ``((s - a)(b - s) / h^2)^3`` on (a, b), zero outside; value and slope."""
    half2 = (0.5 * (b - a)) ** 2
    inside = (s > a) & (s < b)
    u = np.where(inside, (s - a) * (b - s) / half2, 0.0)
    du = np.where(inside, ((b - s) - (s - a)) / half2, 0.0)
    return u**3, 3.0 * u**2 * du


def _mode(q, theta):
    if q == 0:
        return np.ones_like(theta), np.zeros_like(theta)
    if q == 1:
        return np.sin(theta), np.cos(theta)
    return np.sin(2 * theta), 2.0 * np.cos(2 * theta)


def support_grid(support, n: int = 12, r_panels: int = 4, theta_panels: int = 8):
    """Tensor Gauss nodes ``(r, theta, w)`` covering a support rectangle."""
    r0, r1, t0, t1 = support
    r, wr, _ = composite_gauss(np.linspace(r0, r1, r_panels + 1), n)
    th, wt, _ = composite_gauss(np.linspace(t0, t1, theta_panels + 1), n)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    return rr, tt, np.outer(wr, wt)


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Smooth bump ``phi`` supported in ``[r0, r1] x [theta0, theta1]``.

    ``phi = scale * B(r) B(theta) sum_{p,q} c[p, q] rho^p M_q(theta)`` with
    ``rho`` the support-centred radius and ``M_q`` in ``{1, sin, sin 2}``.
    """

    support: tuple
    coeffs: np.ndarray
    scale: float = 1.0
    seed: int | None = None
    _norm: float = field(default=None, repr=False)

    def sample(self, r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        r0, r1, t0, t1 = self.support
        br, dbr = _bump(r, r0, r1)
        bt, dbt = _bump(theta, t0, t1)
        rho = (2.0 * r - r0 - r1) / (r1 - r0)
        drho = 2.0 / (r1 - r0)
        poly = np.zeros_like(r)
        dpoly_r = np.zeros_like(r)
        dpoly_t = np.zeros_like(r)
        for (p, q), c in np.ndenumerate(self.coeffs):
            if c == 0.0:
                continue
            m, dm = _mode(q, theta)
            rp = rho**p
            drp = p * rho ** (p - 1) * drho if p > 0 else 0.0
            poly = poly + c * rp * m
            dpoly_r = dpoly_r + c * drp * m
            dpoly_t = dpoly_t + c * rp * dm
        s = self.scale
        phi = s * br * bt * poly
        phi_r = s * bt * (dbr * poly + br * dpoly_r)
        phi_t = s * br * (dbt * poly + bt * dpoly_t)
        return phi, phi_r, phi_t

    def values(self, grid):
        r, th = grid.mesh
        return self.sample(r, th)[0]

    def scaled(self, factor: float) -> "Perturbation":
        return Perturbation(self.support, self.coeffs, self.scale * factor, self.seed)

    def x0_norm(self) -> float:
        if self._norm is None:
            object.__setattr__(self, "_norm", x0_norm(self))
        return self._norm


def x0_norm(phi, n: int = 12, refine: int = 1) -> float:
    """Squared weighted norm ``int [phi_r^2 + phi_theta^2/r^2 + phi^2/(r^2 sin^2)] r^2 sin``.

    Integrated over the support of ``phi``; ``refine`` multiplies the panel
    counts (used for resolution checks).
    """
    r, th, w = support_grid(phi.support, n, 4 * refine, 8 * refine)
    p, pr, pt = phi.sample(r, th)
    st = np.sin(th)
    integrand = (pr**2 * r**2 + pt**2 + p**2 / st**2) * st
    return float(np.sum(w * integrand))


def _check_support(support):
    r0, r1, t0, t1 = (float(v) for v in support)
    if not (0.0 < r0 < r1 < 1.0 and 0.0 < t0 < t1 < math.pi):
        raise DomainError(f"support {support} is not strictly inside (0,1) x (0,pi)")
    return r0, r1, t0, t1


def random_support(rng) -> tuple:
    return (
        float(rng.uniform(0.05, 0.4)),
        float(rng.uniform(0.6, 0.95)),
        float(rng.uniform(0.15, 1.0)),
        float(rng.uniform(2.1, 3.0)),
    )


def make_perturbation(seed: int, n_modes: int = 3, support=None) -> Perturbation:
    """Seeded random bump normalised to unit :func:`x0_norm`.

    ``n_modes`` of the nine products ``rho^p M_q`` (p, q in 0..2) get
    normal coefficients.  Without ``support`` the rectangle is also drawn
    from the seed.
    """
    rng = np.random.default_rng(seed)
    if support is None:
        support = random_support(rng)
    support = _check_support(support)
    if not 1 <= n_modes <= 9:
        raise DomainError("n_modes must lie in 1..9")
    coeffs = np.zeros((3, 3))
    chosen = rng.choice(9, size=n_modes, replace=False)
    coeffs.flat[chosen] = rng.normal(size=n_modes)
    raw = Perturbation(support, coeffs, 1.0, seed)
    norm = x0_norm(raw)
    return Perturbation(support, coeffs, 1.0 / math.sqrt(norm), seed)


# --- probes -------------------------------------------------------------------------


def _support_samples(profile, phi, eps, n):
    r, th, w = support_grid(phi.support, n)
    base = RadialLifting(profile)
    return r, th, w, base.sample(r, th), SumLifting(base, phi, eps).sample(r, th)


def minimality_probe(profile, phi: Perturbation, epsilons, n: int = 12):
    """``[(eps, J[psi_t + eps phi] - J[psi_t])]``.

    Both energies share the trace at ``r = 1``, so the difference is the
    bulk integral over the support of ``phi`` alone.
    """
    if phi.support[1] >= 1.0:
        raise PreconditionError("perturbation must vanish near r = 1")
    k1, k3 = profile.k1, profile.k3
    out = []
    for eps in epsilons:
        if eps == 0.0:
            out.append((0.0, 0.0))
            continue
        r, th, w, s0, s1 = _support_samples(profile, phi, eps, n)
        d = sum(bulk_densities(s1, r, th, k1, k3)) - sum(bulk_densities(s0, r, th, k1, k3))
        out.append((float(eps), math.pi * float(np.sum(w * d))))
    return out


def probe_deficit(profile, phi: Perturbation, eps: float, n: int = 12) -> float:
    """Sum of the two completed-square deficits of ``psi_t + eps phi``.

    The deficits of ``psi_t`` vanish pointwise, so only the support counts.
    """
    r, th, w, _, s1 = _support_samples(profile, phi, eps, n)
    rr, tt = deficit_densities(s1, r, th, profile.k1, profile.k3)
    return math.pi * float(np.sum(w * (rr + tt)))


def probe_report(profile, perturbations, epsilons) -> str:
    """JSON array of ``{seed, epsilon, delta_J, x0_norm}``."""
    rows = []
    for phi in perturbations:
        for eps, dj in minimality_probe(profile, phi, epsilons):
            rows.append(
                {"seed": phi.seed, "epsilon": eps, "delta_J": dj, "x0_norm": phi.x0_norm()}
            )
    return json.dumps(rows, indent=1)


# --- descent -------------------------------------------------------------------------


class RitzBasis:
    """``eta = (1 - r) sin(theta) sum a[m, n] T_m(2r - 1) T_n(cos theta)``.

    Every member vanishes at ``r = 1`` and on the axis, so ``psi_t + eta``
    keeps the trace and the axis values of ``psi_t``.
    """

    def __init__(self, n_r: int = 5, n_theta: int = 6):
        self.shape = (n_r, n_theta)

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def functions(self, r, theta):
        """Arrays ``(eta, eta_r, eta_theta, eta / sin theta)`` of shape (size, *r.shape)."""
        n_r, n_t = self.shape
        x = 2.0 * r - 1.0
        c = np.cos(theta)
        s = np.sin(theta)
        eye_r = np.eye(n_r)
        eye_t = np.eye(n_t)
        tr = np.stack([cheb.chebval(x, eye_r[m]) for m in range(n_r)])
        dtr = np.stack([2.0 * cheb.chebval(x, cheb.chebder(eye_r[m])) for m in range(n_r)])
        tt = np.stack([cheb.chebval(c, eye_t[n]) for n in range(n_t)])
        dtt = np.stack([cheb.chebval(c, cheb.chebder(eye_t[n])) for n in range(n_t)])
        g = 1.0 - r
        radial = g * tr
        d_radial = -tr + g * dtr
        angular = s * tt
        d_angular = c * tt - s * s * dtt
        eta = (radial[:, None] * angular[None, :]).reshape((-1,) + r.shape)
        eta_r = (d_radial[:, None] * angular[None, :]).reshape((-1,) + r.shape)
        eta_t = (radial[:, None] * d_angular[None, :]).reshape((-1,) + r.shape)
        ratio = (radial[:, None] * tt[None, :]).reshape((-1,) + r.shape)
        return eta, eta_r, eta_t, ratio


class RitzField:
    """A member of the Ritz space, usable as the perturbation of a :class:`SumLifting`."""

    def __init__(self, basis: RitzBasis, coeffs):
        self.basis = basis
        self.coeffs = np.asarray(coeffs, dtype=float)

    def sample(self, r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        eta, er, et, _ = self.basis.functions(r, theta)
        a = self.coeffs[:, None] if r.ndim == 1 else self.coeffs.reshape((-1,) + (1,) * r.ndim)
        return (a * eta).sum(0), (a * er).sum(0), (a * et).sum(0)


@dataclass
class DescentResult:
    lifting: SumLifting
    coeffs: np.ndarray
    iterations: int
    grad_norm: float
    energy_gap: float
    max_deviation: float
    r_variation: float


class _Objective:
    """``J[psi_t + eta] - J[psi_t]`` on a fixed grid, with its exact gradient."""

    def __init__(self, profile, basis, grid_r, grid_t, weights):
        self.k1, self.k3 = profile.k1, profile.k3
        self.r, self.th, self.w = grid_r, grid_t, weights
        self.base = RadialLifting(profile).sample(grid_r, grid_t)
        self.eta, self.eta_r, self.eta_t, _ = basis.functions(grid_r, grid_t)
        self.sin_t = np.sin(grid_t)
        self.ref = sum(bulk_densities(self.base, grid_r, grid_t, self.k1, self.k3))

    def _samples(self, d, dr, dt):
        b = self.base
        chi = b.chi * np.cos(d) + np.cos(b.psi) * np.sin(d) / self.sin_t
        return FieldSamples(b.psi + d, b.psi_r + dr, b.psi_theta + dt, chi)

    def _value(self, d, dr, dt):
        s = self._samples(d, dr, dt)
        dens = sum(bulk_densities(s, self.r, self.th, self.k1, self.k3)) - self.ref
        return math.pi * np.sum(self.w * dens, axis=(-2, -1))

    def combine(self, a):
        d = np.tensordot(a, self.eta, axes=1)
        dr = np.tensordot(a, self.eta_r, axes=1)
        dt = np.tensordot(a, self.eta_t, axes=1)
        return d, dr, dt

    def __call__(self, a):
        d, dr, dt = self.combine(a)
        s = self._samples(d, dr, dt)
        k1, k3, r, st = self.k1, self.k3, self.r, self.sin_t
        dens = sum(bulk_densities(s, r, self.th, k1, k3)) - self.ref
        val = math.pi * float(np.sum(self.w * dens))
        # partial derivatives of the bulk integrand in psi, psi_r, psi_theta
        ang = s.psi - self.th
        sn, cs = np.sin(ang), np.cos(ang)
        s2, c2 = 2.0 * sn * cs, cs * cs - sn * sn
        big_l = k1 * sn**2 + k3 * cs**2
        big_k = k1 * cs**2 + k3 * sn**2
        dk = k1 - k3
        f_psi = st * (
            dk * s2 * (s.psi_r * r) ** 2
            - dk * s2 * s.psi_theta**2
            - 2.0 * dk * c2 * s.psi_r * s.psi_theta * r
        ) + 2.0 * k1 * s.chi * np.cos(s.psi)
        f_r = st * (2.0 * big_l * s.psi_r * r**2 - 2.0 * dk * sn * cs * s.psi_theta * r)
        f_t = st * (2.0 * big_k * s.psi_theta - 2.0 * dk * sn * cs * s.psi_r * r)
        wf = self.w * math.pi
        grad = (
            np.tensordot(self.eta, wf * f_psi, axes=2)
            + np.tensordot(self.eta_r, wf * f_r, axes=2)
            + np.tensordot(self.eta_t, wf * f_t, axes=2)
        )
        return val, grad


def _project(target, eta, w):
    """Weighted least-squares coefficients of ``target`` in the span of ``eta``."""
    sw = np.sqrt(w).ravel()
    mat = (eta.reshape(eta.shape[0], -1) * sw).T
    coef, *_ = np.linalg.lstsq(mat, target.ravel() * sw, rcond=None)
    return coef


def descent_minimize(
    profile,
    initial=None,
    max_iters: int = 500,
    tol: float = 1e-10,
    basis: RitzBasis | None = None,
    n_r: int = 12,
    n_theta: int = 8,
    levels: int = 12,
) -> DescentResult:
    """Minimise the reduced energy over ``psi_t + eta`` with ``eta`` in a Ritz space.

    ``initial`` is any lifting (``sample(r, theta)``); it is projected onto
    the admissible class, so its own trace at ``r = 1`` is replaced by the
    trace of ``psi_t``.  Quasi-Newton (L-BFGS-B) steps are followed by a few
    Newton steps; convergence means gradient norm below ``tol * (1 + |gap|)``.
    """
    basis = RitzBasis() if basis is None else basis
    r, wr, _ = composite_gauss((0.0, 0.5, 1.0), n_r)
    th, wt, _ = theta_rule(n_theta, levels)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    w = np.outer(wr, wt)
    obj = _Objective(profile, basis, rr, tt, w)

    if initial is None:
        a = np.zeros(basis.size)
    else:
        target = initial.sample(rr, tt).psi - obj.base.psi
        a = _project(target, obj.eta, w * np.sin(tt))

    def converged(val, grad):
        return float(np.linalg.norm(grad)) < tol * (1.0 + abs(val))

    val, grad = obj(a)
    iterations = 0
    if not converged(val, grad):
        res = optimize.minimize(
            obj, a, jac=True, method="L-BFGS-B",
            options={"maxiter": max_iters, "gtol": 0.0, "ftol": 0.0, "maxcor": 30},
        )
        a = res.x
        iterations = int(res.nit)
        val, grad = obj(a)
        # Newton polish: the gap is nearly quadratic around the minimiser
        for _ in range(8):
            if converged(val, grad) or iterations >= max_iters:
                break
            hess = _hessian(obj, a)
            step = np.linalg.solve(hess, grad)
            a = a - step
            val, grad = obj(a)
            iterations += 1
    gnorm = float(np.linalg.norm(grad))
    if not converged(val, grad):
        raise IterationError(
            f"descent did not converge in {max_iters} iterations", grad_norm=gnorm
        )
    eta = RitzField(basis, a)
    d, _, _ = obj.combine(a)
    psi = obj.base.psi + d
    return DescentResult(
        lifting=SumLifting(RadialLifting(profile), eta, 1.0),
        coeffs=a,
        iterations=iterations,
        grad_norm=gnorm,
        energy_gap=float(val),
        max_deviation=float(np.max(np.abs(d))),
        r_variation=float(np.max(psi.max(axis=0) - psi.min(axis=0))),
    )


def _hessian(obj, a, h=1e-5):
    n = a.size
    hess = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        hess[:, i] = (obj(a + e)[1] - obj(a - e)[1]) / (2 * h)
    return 0.5 * (hess + hess.T)


def axis_trace_check(lifting, r=None):
    """``sup_r |cos^2 psi - 1|`` extrapolated to ``theta -> 0`` and ``theta -> pi``.

    Linear extrapolation from ``theta = 1e-6`` and ``2e-6`` (and their
    mirrors); admissible liftings give values near zero.
    """
    r = np.linspace(0.05, 1.0, 20) if r is None else np.asarray(r, float)

    def defect(theta):
        psi = lifting.sample(r, np.full_like(r, theta)).psi
        return np.abs(np.cos(psi) ** 2 - 1.0)

    t0 = np.clip(2.0 * defect(1e-6) - defect(2e-6), 0.0, None)
    tpi = np.clip(2.0 * defect(math.pi - 1e-6) - defect(math.pi - 2e-6), 0.0, None)
    return float(t0.max()), float(tpi.max())
