"""Frank constants, the Oseen-Frank energy density and the full Euler-Lagrange residual.

Conventions
-----------
Gradients are stored as ``grad[i, j] = d u_i / d x_j``.  The density is

    2 W = k1 (div u)^2 + k2 (u . curl u)^2 + k3 |u x curl u|^2
          + (k2 + k4) [tr((grad u)^2) - (div u)^2]

where the last bracket is a null Lagrangian, so ``k4`` only changes the
energy by a boundary term.  Which value of ``k4`` is in force is carried by
:class:`K4Convention` because different checks need different choices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._backend import kernels
from .errors import DomainError, InvalidStateError

UNIT_TOL_ANALYTIC = 1e-10
UNIT_TOL_SAMPLED = 1e-6


class K4Convention(str, Enum):
    """How the saddle-splay constant ``k4`` is tied to the others."""

    MINUS_K2 = "MinusK2"
    ALPHA_MINUS_K2 = "AlphaMinusK2"
    EXPLICIT = "Explicit"


@dataclass(frozen=True)
class FrankConstants:
    """Elastic constants ``k1`` (splay), ``k2`` (twist), ``k3`` (bend), ``k4`` (saddle-splay).

    ``k4`` is derived from the convention unless the convention is
    ``EXPLICIT``, in which case it must be given.
    """

    k1: float
    k2: float
    k3: float
    convention: K4Convention = K4Convention.MINUS_K2
    k4: float | None = field(default=None)

    def __post_init__(self):
        for name in ("k1", "k2", "k3"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0.0:
                raise DomainError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, value)
        conv = K4Convention(self.convention)
        object.__setattr__(self, "convention", conv)
        if conv is K4Convention.EXPLICIT:
            if self.k4 is None:
                raise DomainError("explicit convention needs a k4 value")
            derived = float(self.k4)
        elif conv is K4Convention.MINUS_K2:
            derived = -self.k2
        else:
            derived = min(self.k1, self.k2, self.k3) - self.k2
        if self.k4 is not None and conv is not K4Convention.EXPLICIT:
            if not np.isclose(float(self.k4), derived, rtol=1e-14, atol=1e-14):
                raise DomainError(
                    f"k4={self.k4} contradicts convention {conv.value} (expects {derived})"
                )
        object.__setattr__(self, "k4", derived)

    @classmethod
    def one_constant(cls, kappa: float) -> "FrankConstants":
        """Equal constants with ``k4 = k1 - k2``, where the energy is Dirichlet."""
        return cls(kappa, kappa, kappa, K4Convention.EXPLICIT, k4=0.0)

    def with_convention(self, convention: K4Convention, k4: float | None = None):
        return FrankConstants(self.k1, self.k2, self.k3, convention, k4)

    def as_dict(self) -> dict:
        return {
            "k1": self.k1,
            "k2": self.k2,
            "k3": self.k3,
            "k4": self.k4,
            "convention": self.convention.value,
        }


@dataclass(frozen=True)
class DirectorState:
    """A director value ``u`` with its gradient ``grad_u[i, j] = d u_i / d x_j``."""

    u: np.ndarray
    grad_u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float).reshape(3)
        g = np.array(self.grad_u, dtype=float).reshape(3, 3)
        u.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "grad_u", g)

    def unit_defect(self) -> float:
        return abs(float(np.linalg.norm(self.u)) - 1.0)

    def constraint_defect(self) -> float:
        """``|u^T grad_u|``; zero for gradients of exact unit fields."""
        return float(np.linalg.norm(self.u @ self.grad_u))


def coercivity_bounds(k: FrankConstants) -> tuple[float, float]:
    """``(alpha, beta)`` with ``alpha = min(k1, k2, k3)`` and ``beta = 3 k1 + 2 k2 + 2 k3``.

    With ``k4 = alpha - k2`` the density satisfies
    ``alpha/2 |grad u|^2 <= W <= beta/2 |grad u|^2``.
    """
    return min(k.k1, k.k2, k.k3), 3.0 * k.k1 + 2.0 * k.k2 + 2.0 * k.k3


def energy_density_batch(u, grad_u, k: FrankConstants, unit_tol: float = UNIT_TOL_ANALYTIC):
    """Density ``W`` for stacked states: ``u`` (n, 3), ``grad_u`` (n, 3, 3)."""
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    grad_u = np.asarray(grad_u, dtype=float).reshape(-1, 3, 3)
    defect = np.abs(np.linalg.norm(u, axis=1) - 1.0)
    if defect.size and defect.max() > unit_tol:
        raise InvalidStateError(
            f"director not unit length (max defect {defect.max():.3e} > {unit_tol:.1e})"
        )
    return kernels.frank_density(u, grad_u, k.k1, k.k2, k.k3, k.k4)


def energy_density(
    state: DirectorState, k: FrankConstants, unit_tol: float = UNIT_TOL_ANALYTIC
) -> float:
    """Oseen-Frank density ``W(u, grad u)`` of a single state."""
    return float(energy_density_batch(state.u[None], state.grad_u[None], k, unit_tol)[0])


def fd_jacobian(func, points, h):
    """Fourth-order central-difference Jacobian of a vector field.

    ``func`` maps (n, 3) points to (n, 3) vectors; ``h`` is a scalar or (n,)
    step.  Returns (n, 3, 3) with ``J[:, i, j] = d f_i / d x_j``.
    """
    x = np.asarray(points, dtype=float).reshape(-1, 3)
    n = x.shape[0]
    h = np.broadcast_to(np.asarray(h, dtype=float), (n,))
    offsets = np.array([-2.0, -1.0, 1.0, 2.0])
    # integer weights cancel exactly on constant data; divide once at the end
    coeffs = np.array([1.0, -8.0, 8.0, -1.0])
    eye = np.eye(3)
    shifted = x[None, None, :, :] + (
        offsets[None, :, None, None] * h[None, None, :, None] * eye[:, None, None, :]
    )
    vals = np.asarray(func(shifted.reshape(-1, 3)), dtype=float)
    vals = vals.reshape(3, 4, n, -1)
    deriv = np.einsum("o,jonc->ncj", coeffs, vals) / (12.0 * h[:, None, None])
    return deriv


def _first_order_fields(field, points, h1):
    """div u, curl u and (u . curl u) u at ``points`` via finite differences."""
    m = fd_jacobian(field, points, h1)
    u = np.asarray(field(points), dtype=float).reshape(-1, 3)
    div = np.trace(m, axis1=1, axis2=2)
    curl = np.stack(
        [m[:, 2, 1] - m[:, 1, 2], m[:, 0, 2] - m[:, 2, 0], m[:, 1, 0] - m[:, 0, 1]], axis=-1
    )
    twist = np.einsum("ni,ni->n", u, curl)
    return div, curl, twist[:, None] * u, u, twist


def _curl_from_jacobian(jac):
    return np.array([jac[2, 1] - jac[1, 2], jac[0, 2] - jac[2, 0], jac[1, 0] - jac[0, 1]])


def full_el_residual(field, point, k: FrankConstants, h: float | None = None) -> np.ndarray:
    """Euler-Lagrange residual of a director field at one point, multiplier removed.

    Evaluates

        -k1 grad(div u) + k3 curl(curl u)
            + (k2 - k3) [curl((u . curl u) u) + (u . curl u) curl u]

    with nested fourth-order central differences and subtracts its component
    along ``u`` (the Lagrange multiplier of the unit-length constraint).
    ``h`` defaults to ``2e-3 * |point|``; the inner differences use ``h / 4``.
    """
    p = np.asarray(point, dtype=float).reshape(3)
    radius = float(np.linalg.norm(p))
    if h is None:
        h = 2e-3 * radius
    h = float(h)
    h1 = 0.25 * h
    if radius <= 2.0 * h + 2.0 * h1:
        raise DomainError(f"point {p} lies within the stencil radius of the origin")

    offsets = np.array([-2.0, -1.0, 1.0, 2.0])
    coeffs = np.array([1.0, -8.0, 8.0, -1.0])
    stencil = p[None, None, :] + offsets[None, :, None] * h * np.eye(3)[:, None, :]
    div, curl, au, _, _ = _first_order_fields(field, stencil.reshape(-1, 3), h1)
    div = div.reshape(3, 4)
    curl = curl.reshape(3, 4, 3)
    au = au.reshape(3, 4, 3)

    grad_div = np.einsum("o,jo->j", coeffs, div) / (12.0 * h)
    jac_curl = np.einsum("o,joi->ij", coeffs, curl) / (12.0 * h)
    jac_au = np.einsum("o,joi->ij", coeffs, au) / (12.0 * h)

    _, curl_p, _, u_p, twist_p = _first_order_fields(field, p[None], h1)
    lhs = (
        -k.k1 * grad_div
        + k.k3 * _curl_from_jacobian(jac_curl)
        + (k.k2 - k.k3) * (_curl_from_jacobian(jac_au) + twist_p[0] * curl_p[0])
    )
    u_p = u_p[0]
    return lhs - np.dot(u_p, lhs) * u_p
