"""Pure-Python implementation of the hot kernels.

Mirrors the compiled ``_kernels`` extension function for function; the
package picks one of them at import time (see ``_backend``).

The profile ODE is integrated in log-tangent variables

    x = ln tan(theta/2),   y = ln tan(psi/2),   w = y - sigma * x,

in which it reads ``dw/dx = sigma * (g - 1)`` with
``g = 1 / sqrt(1 + (k3/k1 - 1) sin^2(psi - theta))``.  The right-hand side is
bounded and decays like ``exp(2 x)`` at both ends, so the regular singular
points of the original equation at theta = 0, pi disappear.  ``sigma = +1``
is the increasing representative in (0, pi); ``sigma = -1`` the decreasing one.
"""

from __future__ import annotations

import math

import numpy as np

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

BACKEND = "python"


def profile_rhs(x, w, k1, k3, sigma):
    """dw/dx of the log-tangent profile equation (scalar)."""
    if sigma > 0:
        num = math.expm1(w)
        den = math.exp(-x) + math.exp(x + w)
    else:
        num = math.exp(-w) + 1.0
        den = math.exp(-x) - math.exp(x - w)
    rho = math.hypot(num, den)
    if rho == 0.0:
        return 0.0
    s2 = 2.0 * (num / rho) * (den / rho)
    g = 1.0 / math.sqrt(1.0 + (k3 / k1 - 1.0) * s2 * s2)
    return sigma * (g - 1.0)


def profile_rhs_array(x, w, k1, k3, sigma):
    """Vectorised ``profile_rhs``."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if sigma > 0:
        num = np.expm1(w)
        den = np.exp(-x) + np.exp(x + w)
    else:
        num = np.exp(-w) + 1.0
        den = np.exp(-x) - np.exp(x - w)
    rho = np.hypot(num, den)
    rho = np.where(rho == 0.0, 1.0, rho)
    s2 = 2.0 * (num / rho) * (den / rho)
    g = 1.0 / np.sqrt(1.0 + (k3 / k1 - 1.0) * s2 * s2)
    return sigma * (g - 1.0)


def _dp_step(x, w, h, f1, k1, k3, sigma):
    f = profile_rhs
    f2 = f(x + _C2 * h, w + h * _A21 * f1, k1, k3, sigma)
    f3 = f(x + _C3 * h, w + h * (_A31 * f1 + _A32 * f2), k1, k3, sigma)
    f4 = f(x + _C4 * h, w + h * (_A41 * f1 + _A42 * f2 + _A43 * f3), k1, k3, sigma)
    f5 = f(x + _C5 * h, w + h * (_A51 * f1 + _A52 * f2 + _A53 * f3 + _A54 * f4), k1, k3, sigma)
    f6 = f(x + h, w + h * (_A61 * f1 + _A62 * f2 + _A63 * f3 + _A64 * f4 + _A65 * f5), k1, k3, sigma)
    w_new = w + h * (_B1 * f1 + _B3 * f3 + _B4 * f4 + _B5 * f5 + _B6 * f6)
    f7 = f(x + h, w_new, k1, k3, sigma)
    err = h * (_E1 * f1 + _E3 * f3 + _E4 * f4 + _E5 * f5 + _E6 * f6 + _E7 * f7)
    return w_new, f7, err


def integrate_log_profile(
    k1, k3, sigma, x0, w0, targets, rtol, atol, tail_tol, x_limit, max_steps
):
    """Integrate from ``(x0, w0)`` through monotone ``targets`` and on into the tail.

    ``targets`` must move away from ``x0`` in one direction (the sign of
    ``x_limit - x0``).  After the last target the integration continues until
    the tail estimate ``|dw/dx| / 2`` drops below ``tail_tol``; that point is
    returned as the freeze point beyond which ``w`` is treated as constant.

    Returns ``(w_targets, x_freeze, w_freeze, n_steps, tail_converged)``.
    """
    targets = np.asarray(targets, dtype=float)
    out = np.empty(targets.shape[0])
    direction = 1.0 if x_limit > x0 else -1.0
    x, w = float(x0), float(w0)
    f1 = profile_rhs(x, w, k1, k3, sigma)
    h = 0.05 * direction
    n_steps = 0

    def advance_to(x_end):
        nonlocal x, w, f1, h, n_steps
        while (x_end - x) * direction > 0.0:
            if n_steps >= max_steps:
                return False
            remaining = x_end - x
            last = abs(h) >= abs(remaining)
            step = remaining if last else h
            w_new, f_new, err = _dp_step(x, w, step, f1, k1, k3, sigma)
            scale = atol + rtol * max(abs(w), abs(w_new))
            ratio = abs(err) / scale
            n_steps += 1
            if ratio <= 1.0:
                x = x_end if last else x + step
                w = w_new
                f1 = f_new
            factor = 5.0 if ratio == 0.0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
            if ratio <= 1.0 and last:
                # keep the controller's suggestion, not the truncated step
                h = direction * max(abs(h), abs(step) * factor)
            else:
                h = step * factor
        return True

    for i in range(targets.shape[0]):
        if not advance_to(float(targets[i])):
            return out, x, w, n_steps, False
        out[i] = w

    converged = False
    while n_steps < max_steps:
        if 0.5 * abs(f1) < tail_tol and abs(x) >= 1.0:
            converged = True
            break
        if (x_limit - x) * direction <= 0.0:
            break
        x_next = x + h
        if (x_limit - x_next) * direction < 0.0:
            x_next = x_limit
        if not advance_to(x_next):
            break
    return out, x, w, n_steps, converged


def continue_log_profile(k1, k3, sigma, x_from, w_from, x_to, rtol, atol):
    """Integrate many short, independent segments ``x_from -> x_to`` at once.

    All segments share a step size in the normalised parameter s in [0, 1], so
    the loop is vectorised over segments.
    """
    x_from = np.asarray(x_from, dtype=float)
    w = np.array(w_from, dtype=float)
    span = np.asarray(x_to, dtype=float) - x_from
    if w.size == 0 or not np.any(span):
        return w

    def f(s, wv):
        return span * profile_rhs_array(x_from + s * span, wv, k1, k3, sigma)

    s = 0.0
    ds = 0.25
    f1 = f(s, w)
    while s < 1.0:
        last = s + ds >= 1.0
        step = 1.0 - s if last else ds
        f2 = f(s + _C2 * step, w + step * _A21 * f1)
        f3 = f(s + _C3 * step, w + step * (_A31 * f1 + _A32 * f2))
        f4 = f(s + _C4 * step, w + step * (_A41 * f1 + _A42 * f2 + _A43 * f3))
        f5 = f(s + _C5 * step, w + step * (_A51 * f1 + _A52 * f2 + _A53 * f3 + _A54 * f4))
        f6 = f(s + step, w + step * (_A61 * f1 + _A62 * f2 + _A63 * f3 + _A64 * f4 + _A65 * f5))
        w_new = w + step * (_B1 * f1 + _B3 * f3 + _B4 * f4 + _B5 * f5 + _B6 * f6)
        f7 = f(s + step, w_new)
        err = step * (_E1 * f1 + _E3 * f3 + _E4 * f4 + _E5 * f5 + _E6 * f6 + _E7 * f7)
        ratio = float(np.max(np.abs(err) / (atol + rtol * np.abs(w_new))))
        if ratio <= 1.0:
            s = 1.0 if last else s + step
            w = w_new
            f1 = f7
        factor = 5.0 if ratio == 0.0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
        ds = step * factor
    return w


def frank_density(u, grad, k1, k2, k3, k4):
    """Oseen-Frank density W for stacked states.

    ``u`` has shape (n, 3) and ``grad`` shape (n, 3, 3) with
    ``grad[:, i, j] = d u_i / d x_j``.
    """
    u = np.asarray(u, dtype=float)
    m = np.asarray(grad, dtype=float)
    div = m[:, 0, 0] + m[:, 1, 1] + m[:, 2, 2]
    curl = np.stack(
        [m[:, 2, 1] - m[:, 1, 2], m[:, 0, 2] - m[:, 2, 0], m[:, 1, 0] - m[:, 0, 1]],
        axis=-1,
    )
    twist = np.einsum("ni,ni->n", u, curl)
    bend = np.cross(u, curl)
    tr_m2 = np.einsum("nij,nji->n", m, m)
    two_w = (
        k1 * div**2
        + k2 * twist**2
        + k3 * np.einsum("ni,ni->n", bend, bend)
        + (k2 + k4) * (tr_m2 - div**2)
    )
    return 0.5 * two_w
