"""Director fields built from liftings, liftings recovered from samples, and degree."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotEquivariantError, ResolutionError
from .frank_core import fd_jacobian
from .quadrature import theta_rule

J_REFLECTION = np.diag([-1.0, 1.0, 1.0])


def rotation_e3(eta: float) -> np.ndarray:
    c, s = math.cos(eta), math.sin(eta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def cartesian_to_spherical(points):
    p = np.asarray(points, dtype=float)
    rho = np.hypot(p[..., 0], p[..., 1])
    r = np.hypot(rho, p[..., 2])
    theta = np.arctan2(rho, p[..., 2])
    phi = np.arctan2(p[..., 1], p[..., 0])
    return r, theta, phi


def spherical_to_cartesian(r, theta, phi):
    r, theta, phi = np.broadcast_arrays(
        np.asarray(r, dtype=float), np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
    )
    s = np.sin(theta)
    return np.stack([r * s * np.cos(phi), r * s * np.sin(phi), r * np.cos(theta)], axis=-1)


class DirectorField:
    """A unit vector field on R^3 minus the origin.

    ``func`` maps an (..., 3) array of points to (..., 3) unit vectors.
    Fields built from a lifting keep a reference to it in ``profile``.
    """

    def __init__(self, func, homogeneous: bool = False, profile=None, name: str = "field"):
        self._func = func
        self.homogeneous = homogeneous
        self.profile = profile
        self.name = name

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        out = np.asarray(self._func(pts.reshape(-1, 3)), dtype=float)
        return out.reshape(pts.shape)

    def spherical(self, r, theta, phi):
        return self(spherical_to_cartesian(r, theta, phi))

    def gradient(self, points, h=None):
        """Finite-difference gradient ``G[..., i, j] = d u_i / d x_j``.

        The default step is ``1e-4 * |x|``, matching the scale invariance of
        zero-homogeneous fields.
        """
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 3)
        if h is None:
            h = 1e-4 * np.linalg.norm(flat, axis=1)
        jac = fd_jacobian(self, flat, h)
        return jac.reshape(pts.shape[:-1] + (3, 3))


def _lifting_field(sample_chi, name, homogeneous, profile):
    """Director ``u = (chi x1/|x|, chi x2/|x|, cos psi)`` from a lifting sampler.

    ``sample_chi(r, theta) -> (psi, chi)``.  Using ``chi`` with the
    Cartesian ratios avoids dividing by ``sin theta`` near the axis.
    """

    def func(points):
        r, theta, _ = cartesian_to_spherical(points)
        psi, chi = sample_chi(r, theta)
        inv = 1.0 / r
        return np.stack(
            [chi * points[:, 0] * inv, chi * points[:, 1] * inv, np.cos(psi)], axis=-1
        )

    return DirectorField(func, homogeneous=homogeneous, profile=profile, name=name)


def build_director(profile) -> DirectorField:
    """``u(r, theta, phi) = sin(psi) e_phi_perp + cos(psi) e_3`` for ``psi = psi(theta)``."""

    def sample(r, theta):
        psi, _, chi = profile.evaluate(theta)
        return psi, chi

    return _lifting_field(sample, getattr(profile, "name", "profile"), True, profile)


def build_director_2d(lifting) -> DirectorField:
    """Director from an ``(r, theta)`` lifting exposing ``sample(r, theta)``."""

    def sample(r, theta):
        s = lifting.sample(r, theta)
        return s.psi, s.chi

    return _lifting_field(sample, "lifting", False, lifting)


def hedgehog(sign: float = 1.0) -> DirectorField:
    """``sign * x / |x|``."""

    def func(points):
        return sign * points / np.linalg.norm(points, axis=-1, keepdims=True)

    return DirectorField(func, homogeneous=True, name="hedgehog" if sign > 0 else "antipodal")


def constant_field(vector=(0.0, 0.0, 1.0)) -> DirectorField:
    v = np.asarray(vector, dtype=float)
    v = v / np.linalg.norm(v)

    def func(points):
        return np.broadcast_to(v, points.shape).copy()

    return DirectorField(func, homogeneous=True, name="constant")


# --- lifting ------------------------------------------------------------------


@dataclass(frozen=True)
class LiftReport:
    """Result of lifting equivariant samples.

    ``j`` is the class read off the axis traces ``psi(., pi) - psi(., 0)``.
    """

    psi: np.ndarray
    max_c: float
    j: int
    trace0: float
    tracepi: float


def _unwrap_from(raw, mid, max_jump):
    """Unwrap along the last axis outward from index ``mid``."""
    psi = raw.copy()
    right = np.unwrap(raw[..., mid:], axis=-1)
    left = np.unwrap(raw[..., : mid + 1][..., ::-1], axis=-1)[..., ::-1]
    psi[..., mid:] = right
    psi[..., : mid + 1] = left
    if np.any(np.abs(np.diff(psi, axis=-1)) >= max_jump):
        raise ResolutionError("ambiguous unwrapping between neighbouring angles")
    return psi


def lift_equivariant(
    samples, theta, c_tol: float = 1e-8, max_jump: float = 0.75 * math.pi
) -> LiftReport:
    """Recover ``psi`` from director samples on an ``(r, theta)`` grid at ``phi = 0``.

    ``samples`` has shape (n_r, n_theta, 3) (or (n_theta, 3) for a single
    radius).  At ``phi = 0`` the frame vectors are ``e_phi_perp = e1`` and
    ``e_phi = e2``, so ``a = u1``, ``b = u3`` and ``c = u2``.  The angle is
    anchored with ``psi(., pi/2)`` in (-pi, pi] and unwrapped outward.
    """
    u = np.asarray(samples, dtype=float)
    single = u.ndim == 2
    if single:
        u = u[None]
    theta = np.asarray(theta, dtype=float)
    a, c, b = u[..., 0], u[..., 1], u[..., 2]
    max_c = float(np.max(np.abs(c)))
    if max_c > c_tol:
        raise NotEquivariantError(f"e_phi component {max_c:.3e} exceeds {c_tol:.1e}")
    raw = np.arctan2(a, b)
    mid = int(np.argmin(np.abs(theta - 0.5 * math.pi)))
    psi = _unwrap_from(raw, mid, max_jump)
    if psi.shape[0] > 1 and np.any(np.abs(np.diff(psi, axis=0)) >= max_jump):
        raise ResolutionError("ambiguous unwrapping between neighbouring radii")
    end0 = psi[:, 0]
    endpi = psi[:, -1]
    trace0 = float(np.max(np.abs(np.cos(end0) ** 2 - 1.0)))
    tracepi = float(np.max(np.abs(np.cos(endpi) ** 2 - 1.0)))
    j = int(np.rint(np.median(endpi - end0) / math.pi))
    return LiftReport(psi[0] if single else psi, max_c, j, trace0, tracepi)


# --- diagnostics ----------------------------------------------------------------


def equivariance_residual(field, n_samples: int = 200, seed: int = 0):
    """Largest ``|u(R x) - R u(x)|`` and ``|u(J x) - J u(x)|`` over random samples."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_samples, 3))
    x *= (rng.uniform(0.1, 1.0, n_samples) / np.linalg.norm(x, axis=1))[:, None]
    eta = rng.uniform(0.0, 2.0 * math.pi, n_samples)
    rots = np.stack([rotation_e3(e) for e in eta])
    ux = field(x)
    rx = np.einsum("nij,nj->ni", rots, x)
    max_rot = np.max(np.linalg.norm(field(rx) - np.einsum("nij,nj->ni", rots, ux), axis=1))
    jx = x @ J_REFLECTION.T
    max_ref = np.max(np.linalg.norm(field(jx) - ux @ J_REFLECTION.T, axis=1))
    return float(max_rot), float(max_ref)


def degree(field, n_theta_panel: int = 12, levels: int = 20, n_phi: int = 32):
    """Topological degree of ``field`` restricted to the unit sphere.

    Computes ``(1/4 pi) int u . (d_theta u x d_phi u) dtheta dphi`` with a
    graded Gauss rule in theta, the trapezoid rule in phi and fourth-order
    differences for the tangential derivatives.  Returns ``(integer, raw)``.
    """
    theta, wt, _ = theta_rule(n_theta_panel, levels)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    h_th = 1e-3 * np.minimum(th, math.pi - th).clip(max=1.0)
    h_ph = 1e-3

    def u_at(t, p):
        return field(spherical_to_cartesian(1.0, t, p))

    d_th = (
        u_at(th - 2 * h_th, ph) - 8 * u_at(th - h_th, ph)
        + 8 * u_at(th + h_th, ph) - u_at(th + 2 * h_th, ph)
    ) / (12.0 * h_th[..., None])
    d_ph = (
        u_at(th, ph - 2 * h_ph) - 8 * u_at(th, ph - h_ph)
        + 8 * u_at(th, ph + h_ph) - u_at(th, ph + 2 * h_ph)
    ) / (12.0 * h_ph)
    density = np.einsum("...i,...i->...", u_at(th, ph), np.cross(d_th, d_ph))
    raw = float(np.sum(density * wt[:, None]) * (2.0 * math.pi / n_phi) / (4.0 * math.pi))
    nearest = int(round(raw))
    if abs(raw - nearest) > 0.01:
        raise ResolutionError(f"degree integral {raw:.6f} is not close to an integer")
    return nearest, raw


def grad_norm_sq(profile):
    """``(r, theta) -> |grad u|^2 = (psi'^2 + chi^2) / r^2`` for an r-independent lifting."""

    def value(r, theta):
        _, dpsi, chi = profile.evaluate(theta)
        return (dpsi**2 + chi**2) / np.asarray(r, dtype=float) ** 2

    return value


def sample_csv(field, r, theta, phi) -> str:
    """CSV rows ``r, theta, phi, u1, u2, u3`` on the tensor grid of the inputs."""
    rr, tt, pp = np.meshgrid(
        np.atleast_1d(r), np.atleast_1d(theta), np.atleast_1d(phi), indexing="ij"
    )
    u = field.spherical(rr, tt, pp)
    buf = io.StringIO()
    buf.write("r,theta,phi,u1,u2,u3\n")
    for row in zip(rr.ravel(), tt.ravel(), pp.ravel(), *u.reshape(-1, 3).T):
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()
