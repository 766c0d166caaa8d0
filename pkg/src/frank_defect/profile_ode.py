"""Profiles psi(theta) of zero-homogeneous equivariant critical points.

The profile equation

    psi' = sqrt(k1) sin(psi) / (sin(theta) sqrt(K)),
    K    = k1 cos^2(psi - theta) + k3 sin^2(psi - theta),

has regular singular points at theta = 0 and theta = pi.  It is solved in
log-tangent variables (see ``_kernels_py``): with ``x = ln tan(theta/2)``
and ``w = ln tan(phi/2) - sigma x`` the equation becomes a bounded,
exponentially decaying right-hand side on the whole real line.  Endpoint
values are reached by letting ``w`` settle into its limit, so there is no
integration into the singularity.

Branches with other midpoint values reduce to two representatives on
(0, pi): an increasing one (sigma = +1) and a decreasing one (sigma = -1,
reached through psi -> psi - pi).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ._backend import kernels
from .errors import DomainError, NumericalError, PreconditionError
from .quadrature import chebyshev_lobatto

DEFAULT_TOL = 1e-10
DEFAULT_NODES = 512
_X_LIMIT = 80.0
_MAX_STEPS = 500_000


class BranchKind(str, Enum):
    CONSTANT = "Constant"
    INCREASING = "IncreasingZeroToPi"
    DECREASING = "DecreasingTwoPiToPi"
    SHIFTED = "ShiftedBy2lPi"
    NEGATIVE_MIRROR = "NegativeMirror"


@dataclass(frozen=True)
class Branch:
    """Which solution family a profile belongs to.

    ``ell`` is the integer with ``psi(0) = 2 ell pi`` (increasing) or
    ``psi(pi) = (2 ell + 1) pi`` (decreasing).
    """

    kind: BranchKind
    ell: int = 0
    increasing: bool = True

    @property
    def label(self) -> str:
        if self.kind is BranchKind.SHIFTED:
            return f"ShiftedBy2lPi({self.ell})"
        return self.kind.value

    @property
    def endpoints(self) -> tuple[float, float]:
        """Exact values ``(psi(0), psi(pi))``."""
        if self.kind is BranchKind.CONSTANT:
            raise AttributeError("constant branch endpoints depend on t")
        if self.increasing:
            return 2 * self.ell * math.pi, (2 * self.ell + 1) * math.pi
        return (2 * self.ell + 2) * math.pi, (2 * self.ell + 1) * math.pi


def classify_branch(t: float) -> Branch:
    """Branch selected by the midpoint value ``t = psi(pi/2)``."""
    q = t / math.pi
    n = math.floor(q)
    if q == n:
        return Branch(BranchKind.CONSTANT, ell=0)
    if n % 2 == 0:
        ell = n // 2
        kind = BranchKind.INCREASING if ell == 0 else BranchKind.SHIFTED
        return Branch(kind, ell=ell, increasing=True)
    ell = (n - 1) // 2
    kind = BranchKind.DECREASING if ell == 0 else BranchKind.SHIFTED
    return Branch(kind, ell=ell, increasing=False)


# --- change of variables ----------------------------------------------------


def theta_to_x(theta):
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(np.tan(0.5 * theta))


def x_to_theta(x):
    return 2.0 * np.arctan(np.exp(np.asarray(x, dtype=float)))


def _reconstruct(theta, w, sigma):
    """Angle ``phi`` in [0, pi] and ``sin(phi)/sin(theta)`` from ``(theta, w)``.

    Written separately on each half so that nothing overflows and the
    endpoint limits come out exactly.
    """
    theta = np.asarray(theta, dtype=float)
    w = np.asarray(w, dtype=float)
    left = theta <= 0.5 * np.pi
    # tan(theta/2) on the left half, cot(theta/2) on the right half
    tau = np.where(left, np.tan(0.5 * theta), np.tan(0.5 * (np.pi - theta)))
    if sigma > 0:
        e = np.where(left, np.exp(np.where(left, w, 0.0)), np.exp(-np.where(left, 0.0, w)))
        a = tau * e
        phi = np.where(left, 2.0 * np.arctan(a), np.pi - 2.0 * np.arctan(a))
    else:
        e = np.where(left, np.exp(-np.where(left, w, 0.0)), np.exp(np.where(left, 0.0, w)))
        a = tau * e
        phi = np.where(left, np.pi - 2.0 * np.arctan(a), 2.0 * np.arctan(a))
    chi = e * (1.0 + tau * tau) / (1.0 + a * a)
    return phi, chi


def _slope(theta, phi, chi, k1, k3, sigma):
    d = phi - theta
    big_k = k1 * np.cos(d) ** 2 + k3 * np.sin(d) ** 2
    return sigma * math.sqrt(k1) * chi / np.sqrt(big_k)


# --- analytic helpers ---------------------------------------------------------


def closed_form_one_constant(t, theta):
    """One-constant profile ``arccos((cos t + cos theta)/(1 + cos t cos theta))``.

    Evaluated through the equivalent ``2 atan(tan(t/2) tan(theta/2))``, which
    keeps full relative accuracy near the axis where the arccos form does not.
    """
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    half_t = np.tan(0.5 * t)
    left = theta <= 0.5 * np.pi
    safe_left = np.where(left, theta, 0.0)
    safe_right = np.where(left, np.pi, theta)
    lo = 2.0 * np.arctan(half_t * np.tan(0.5 * safe_left))
    hi = np.pi - 2.0 * np.arctan(np.tan(0.5 * (np.pi - safe_right)) / half_t)
    out = np.where(left, lo, hi)
    return float(out) if out.ndim == 0 else out


def bracket_bounds(t, theta, k1, k3):
    """Lower and upper bounds on ``ln tan(psi(theta)/2)`` for the increasing branch.

    Since ``d ln tan(psi/2) / d ln tan(theta/2)`` lies between
    ``p1 = sqrt(k1)/max(sqrt(k1), sqrt(k3))`` and
    ``p2 = sqrt(k1)/min(sqrt(k1), sqrt(k3))``, integrating from pi/2 gives
    the pair; it is ordered so that ``lower <= upper`` on both halves.
    """
    s1, s3 = math.sqrt(k1), math.sqrt(k3)
    p1, p2 = s1 / max(s1, s3), s1 / min(s1, s3)
    x = theta_to_x(theta)
    base = math.log(math.tan(0.5 * t))
    a, b = p1 * x, p2 * x
    return base + np.minimum(a, b), base + np.maximum(a, b)


class AnalyticProfile:
    """A profile given by closed-form ``psi`` and ``psi'`` (test data, hedgehog)."""

    def __init__(self, psi, dpsi, chi=None, name="analytic"):
        self._psi = psi
        self._dpsi = dpsi
        self._chi = chi
        self.name = name

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=float)
        psi = np.asarray(self._psi(theta), dtype=float) * np.ones_like(theta)
        dpsi = np.asarray(self._dpsi(theta), dtype=float) * np.ones_like(theta)
        if self._chi is not None:
            chi = np.asarray(self._chi(theta), dtype=float) * np.ones_like(theta)
        else:
            s = np.sin(theta)
            axis = s == 0.0
            # L'Hopital on the axis: sin(psi)/sin(theta) -> cos(psi) psi' / cos(theta)
            chi = np.where(
                axis,
                np.cos(psi) * dpsi / np.cos(theta),
                np.sin(psi) / np.where(axis, 1.0, s),
            )
        return psi, dpsi, chi


def identity_profile() -> AnalyticProfile:
    """``psi = theta``: the hedgehog lifting."""
    return AnalyticProfile(lambda th: th, lambda th: 1.0, lambda th: 1.0, name="hedgehog")


def constant_profile(value: float) -> AnalyticProfile:
    """``psi`` identically equal to a multiple of pi."""
    if not math.isclose(math.sin(value), 0.0, abs_tol=1e-15):
        raise DomainError("a constant lifting must be a multiple of pi")
    return AnalyticProfile(lambda th: value, lambda th: 0.0, lambda th: 0.0, name="constant")


# --- solved profiles ----------------------------------------------------------


@dataclass(frozen=True)
class _Side:
    """Integration record on one side of the anchor."""

    x_freeze: float
    w_freeze: float
    w_limit: float
    converged: bool
    n_steps: int


@dataclass(frozen=True, eq=False)
class ProfileSolution:
    """A solved profile sampled on ``theta_nodes`` with exact endpoint limits.

    ``evaluate`` gives ``psi``, ``psi'`` and ``chi = sin(psi)/sin(theta)`` at
    arbitrary angles by continuing the ODE from the nearest stored node.
    """

    k1: float
    k3: float
    t: float
    tol: float
    branch: Branch
    theta_nodes: np.ndarray
    psi: np.ndarray
    psi_prime: np.ndarray
    chi: np.ndarray
    sigma: int = 0
    offset: float = 0.0
    _x: np.ndarray = field(default=None, repr=False)
    _w: np.ndarray = field(default=None, repr=False)
    _left: _Side = field(default=None, repr=False)
    _right: _Side = field(default=None, repr=False)

    @property
    def c0(self) -> float:
        return float(self.chi[0])

    @property
    def cpi(self) -> float:
        return float(self.chi[-1])

    def _chi_sign(self) -> float:
        # sin(phi + offset) = +-sin(phi) for even/odd multiples of pi
        return 1.0 if round(self.offset / math.pi) % 2 == 0 else -1.0

    def w_at_x(self, x):
        """The log-tangent unknown at arbitrary ``x`` (finite or infinite)."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty_like(flat)
        lo = flat <= self._left.x_freeze
        hi = flat >= self._right.x_freeze
        mid = ~(lo | hi)
        if np.any(lo):
            decay = np.exp(np.clip(2.0 * (flat[lo] - self._left.x_freeze), -700, 0))
            out[lo] = self._left.w_limit + (self._left.w_freeze - self._left.w_limit) * decay
        if np.any(hi):
            decay = np.exp(np.clip(-2.0 * (flat[hi] - self._right.x_freeze), -700, 0))
            out[hi] = self._right.w_limit + (self._right.w_freeze - self._right.w_limit) * decay
        if np.any(mid):
            xq = flat[mid]
            idx = np.searchsorted(self._x, xq).clip(1, len(self._x) - 1)
            left_closer = (xq - self._x[idx - 1]) <= (self._x[idx] - xq)
            near = np.where(left_closer, idx - 1, idx)
            local = max(self.tol * 1e-3, 1e-15)
            out[mid] = kernels.continue_log_profile(
                self.k1, self.k3, float(self.sigma), self._x[near], self._w[near], xq, local, local
            )
        return out.reshape(x.shape)

    def evaluate(self, theta):
        """``(psi, psi', chi)`` at arbitrary angles in [0, pi]."""
        theta = np.asarray(theta, dtype=float)
        if np.any((theta < 0.0) | (theta > np.pi)):
            raise DomainError("theta outside [0, pi]")
        if self.sigma == 0:
            zero = np.zeros_like(theta)
            return self.t + zero, zero, zero.copy()
        w = self.w_at_x(theta_to_x(theta))
        phi, chi_phi = _reconstruct(theta, w, self.sigma)
        dpsi = _slope(theta, phi, chi_phi, self.k1, self.k3, self.sigma)
        return phi + self.offset, dpsi, self._chi_sign() * chi_phi

    def __call__(self, theta):
        return self.evaluate(theta)[0]

    def diagnostics(self) -> dict:
        out = {"branch": self.branch.label, "sigma": self.sigma, "tol": self.tol}
        if self._left is not None:
            out.update(
                x_freeze=(self._left.x_freeze, self._right.x_freeze),
                n_steps=self._left.n_steps + self._right.n_steps,
            )
        return out

    # --- serialization ------------------------------------------------------

    def header(self) -> dict:
        return {
            "k1": self.k1,
            "k3": self.k3,
            "t": self.t,
            "tol": self.tol,
            "branch": self.branch.label,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("theta,psi,psi_prime,chi\n")
        for row in zip(self.theta_nodes, self.psi, self.psi_prime, self.chi):
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        payload = dict(self.header())
        payload["theta"] = [float(v) for v in self.theta_nodes]
        payload["psi"] = [float(v) for v in self.psi]
        payload["psi_prime"] = [float(v) for v in self.psi_prime]
        payload["chi"] = [float(v) for v in self.chi]
        return json.dumps(payload, indent=1)


def _integrate_side(k1, k3, sigma, x0, w0, targets, direction, local_tol):
    w_t, x_f, w_f, n_steps, ok = kernels.integrate_log_profile(
        k1, k3, float(sigma), x0, w0, targets, local_tol, local_tol, local_tol,
        direction * _X_LIMIT, _MAX_STEPS,
    )
    if not ok:
        raise NumericalError(
            "asymptotic patch did not converge",
            direction=direction,
            x_reached=x_f,
            n_steps=n_steps,
        )
    f = kernels.profile_rhs(x_f, w_f, k1, k3, float(sigma))
    # the remaining increment of w decays like exp(-2|x|), so it equals f/2
    w_limit = w_f + direction * 0.5 * f
    return np.asarray(w_t), _Side(x_f, w_f, w_limit, True, int(n_steps))


def _check_tol(tol):
    if not (1e-14 <= tol <= 1e-6):
        raise DomainError(f"tol must lie in [1e-14, 1e-6], got {tol}")


def _solve_reduced(k1, k3, sigma, x0, w0, theta, tol, t, branch, offset):
    """Integrate the reduced problem in (0, pi) both ways from ``(x0, w0)``."""
    local = max(tol * 1e-2, 1e-15)
    x = theta_to_x(theta)
    interior = np.isfinite(x)
    xi = x[interior]
    left_mask = xi < x0
    right_mask = xi > x0
    left_targets = xi[left_mask][::-1]
    right_targets = xi[right_mask]
    w_left, left = _integrate_side(k1, k3, sigma, x0, w0, left_targets, -1.0, local)
    w_right, right = _integrate_side(k1, k3, sigma, x0, w0, right_targets, 1.0, local)

    wi = np.empty_like(xi)
    wi[left_mask] = w_left[::-1]
    wi[right_mask] = w_right
    wi[~(left_mask | right_mask)] = w0
    w_all = np.empty_like(x)
    w_all[interior] = wi
    w_all[x == -np.inf] = left.w_limit
    w_all[x == np.inf] = right.w_limit

    store_x = np.concatenate([xi, [x0]]) if not np.any(xi == x0) else xi
    store_w = np.concatenate([wi, [w0]]) if not np.any(xi == x0) else wi
    order = np.argsort(store_x)

    phi, chi_phi = _reconstruct(theta, w_all, sigma)
    dpsi = _slope(theta, phi, chi_phi, k1, k3, sigma)
    sign = 1.0 if round(offset / math.pi) % 2 == 0 else -1.0
    return ProfileSolution(
        k1=float(k1),
        k3=float(k3),
        t=float(t),
        tol=float(tol),
        branch=branch,
        theta_nodes=np.asarray(theta, dtype=float),
        psi=phi + offset,
        psi_prime=dpsi,
        chi=sign * chi_phi,
        sigma=int(sigma),
        offset=float(offset),
        _x=store_x[order],
        _w=store_w[order],
        _left=left,
        _right=right,
    )


def _default_nodes(nodes):
    if nodes is None:
        return chebyshev_lobatto(DEFAULT_NODES)
    if isinstance(nodes, (int, np.integer)):
        return chebyshev_lobatto(int(nodes))
    theta = np.asarray(nodes, dtype=float)
    if np.any(np.diff(theta) <= 0) or theta[0] < 0 or theta[-1] > np.pi:
        raise DomainError("theta nodes must be strictly increasing inside [0, pi]")
    return theta


def _validate_constants(k1, k3):
    if not (k1 > 0 and k3 > 0 and math.isfinite(k1) and math.isfinite(k3)):
        raise DomainError("k1 and k3 must be positive")


def solve_profile(k1, k3, t, tol=DEFAULT_TOL, nodes=None, anchor=None) -> ProfileSolution:
    """Solve the increasing profile with ``psi(pi/2) = t`` for ``t`` in (0, pi).

    ``nodes`` is a node count (Chebyshev-Lobatto) or an explicit increasing
    grid on [0, pi].  ``anchor = (theta0, psi0)`` replaces the midpoint
    condition with ``psi(theta0) = psi0``; ``t`` is then ignored and read off
    the solution.
    """
    _validate_constants(k1, k3)
    _check_tol(tol)
    theta = _default_nodes(nodes)
    branch = Branch(BranchKind.INCREASING)
    if anchor is None:
        if not (0.0 < t < math.pi):
            raise DomainError(f"t={t} outside (0, pi); use solve_branch")
        return _solve_reduced(k1, k3, 1, 0.0, math.log(math.tan(0.5 * t)), theta, tol, t, branch, 0.0)

    theta0, psi0 = (float(v) for v in anchor)
    if not (0.0 < theta0 < math.pi and 0.0 < psi0 < math.pi):
        raise DomainError("anchor must lie inside (0, pi) x (0, pi)")
    x0 = math.log(math.tan(0.5 * theta0))
    w0 = math.log(math.tan(0.5 * psi0)) - x0
    sol = _solve_reduced(k1, k3, 1, x0, w0, theta, tol, math.nan, branch, 0.0)
    t_mid = float(sol.evaluate(np.array([0.5 * np.pi]))[0][0])
    return _replace_t(sol, t_mid)


def _replace_t(sol: ProfileSolution, t: float) -> ProfileSolution:
    return replace(sol, t=t)


def solve_branch(k1, k3, t, tol=DEFAULT_TOL, nodes=None) -> ProfileSolution:
    """Solve the profile equation for any real midpoint value ``t``.

    Multiples of pi give constant profiles.  Otherwise the problem reduces by
    a shift of an integer multiple of pi to an increasing or decreasing
    profile with values in (0, pi).
    """
    _validate_constants(k1, k3)
    _check_tol(tol)
    theta = _default_nodes(nodes)
    branch = classify_branch(t)
    if branch.kind is BranchKind.CONSTANT:
        zero = np.zeros_like(theta)
        return ProfileSolution(
            k1=float(k1), k3=float(k3), t=float(t), tol=float(tol), branch=branch,
            theta_nodes=theta, psi=t + zero, psi_prime=zero, chi=zero.copy(), sigma=0,
            offset=float(t),
        )
    if branch.increasing:
        offset = 2.0 * branch.ell * math.pi
        sigma = 1
    else:
        offset = (2.0 * branch.ell + 1.0) * math.pi
        sigma = -1
    reduced = t - offset
    w0 = math.log(math.tan(0.5 * reduced))
    return _solve_reduced(k1, k3, sigma, 0.0, w0, theta, tol, t, branch, offset)


def negative_mirror(k1, k3, t, tol=DEFAULT_TOL, nodes=None) -> ProfileSolution:
    """The critical profile with ``psi(pi/2) = -t``, decreasing from 0 to -pi.

    For ``k1 == k3`` it coincides with ``-psi_t``; otherwise ``-psi_t`` is not
    a solution (the coefficient ``K`` is not even in psi) and this branch is
    the correct partner.
    """
    if not (0.0 < t < math.pi):
        raise DomainError("t must lie in (0, pi)")
    sol = solve_branch(k1, k3, -t, tol, nodes)
    return replace(sol, branch=Branch(BranchKind.NEGATIVE_MIRROR, ell=-1, increasing=False))


def endpoint_rates(profile: ProfileSolution) -> tuple[float, float]:
    """Linear rates ``c0 = lim psi/theta`` and ``cpi = lim (pi - psi)/(pi - theta)``.

    Read from the limits of the log-tangent unknown; they equal ``chi(0)``
    and ``chi(pi)``.
    """
    if profile.sigma != 1 or profile.branch.kind is BranchKind.NEGATIVE_MIRROR:
        raise PreconditionError("endpoint rates are defined for increasing branches")
    if not (profile._left.converged and profile._right.converged):
        raise NumericalError("endpoint limits not converged", **profile.diagnostics())
    c0 = math.exp(profile._left.w_limit)
    cpi = math.exp(-profile._right.w_limit)
    if not (np.isfinite(c0) and np.isfinite(cpi) and c0 > 0 and cpi > 0):
        raise NumericalError("endpoint rates not finite", c0=c0, cpi=cpi)
    return c0, cpi


def ode_residual(profile: ProfileSolution, theta=None):
    """``sin(theta) sqrt(K) psi' - sigma sqrt(k1) sin(psi)`` at interior angles."""
    theta = profile.theta_nodes[1:-1] if theta is None else np.asarray(theta, dtype=float)
    psi, dpsi, _ = profile.evaluate(theta)
    d = psi - theta
    big_k = profile.k1 * np.cos(d) ** 2 + profile.k3 * np.sin(d) ** 2
    return np.sin(theta) * np.sqrt(big_k) * dpsi - math.sqrt(profile.k1) * np.sin(psi)


def write_profile(profile: ProfileSolution, path, fmt: str = "csv") -> None:
    """Write a profile as CSV (with a JSON header line in a comment) or JSON."""
    from .io_utils import atomic_write

    if fmt == "csv":
        text = "# " + json.dumps(profile.header()) + "\n" + profile.to_csv()
    elif fmt == "json":
        text = profile.to_json()
    else:
        raise ValueError(f"unknown profile format {fmt!r}")
    atomic_write(path, text)
