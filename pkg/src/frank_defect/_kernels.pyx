# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_kernels_py``.

Same signatures and semantics; see that module for the change of variables.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, sqrt, hypot, fabs, fmin, fmax, pow

cnp.import_array()

BACKEND = "cython"

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40


cdef inline double _rhs(double x, double w, double k1, double k3, double sigma) noexcept nogil:
    cdef double num, den, rho, s2
    if sigma > 0:
        num = expm1(w)
        den = exp(-x) + exp(x + w)
    else:
        num = exp(-w) + 1.0
        den = exp(-x) - exp(x - w)
    rho = hypot(num, den)
    if rho == 0.0:
        return 0.0
    s2 = 2.0 * (num / rho) * (den / rho)
    return sigma * (1.0 / sqrt(1.0 + (k3 / k1 - 1.0) * s2 * s2) - 1.0)


def profile_rhs(double x, double w, double k1, double k3, double sigma):
    """dw/dx of the log-tangent profile equation (scalar)."""
    return _rhs(x, w, k1, k3, sigma)


def profile_rhs_array(x, w, double k1, double k3, double sigma):
    """Vectorised ``profile_rhs``."""
    xb, wb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(w, dtype=float))
    cdef const double[::1] xf = np.ascontiguousarray(xb).ravel()
    cdef const double[::1] wf = np.ascontiguousarray(wb).ravel()
    out = np.empty(xf.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(xf.shape[0]):
        o[i] = _rhs(xf[i], wf[i], k1, k3, sigma)
    return out.reshape(xb.shape)


cdef inline double _dp_step(double x, double w, double h, double f1,
                            double k1, double k3, double sigma,
                            double* f_out, double* err_out) noexcept nogil:
    cdef double f2, f3, f4, f5, f6, f7, w_new
    f2 = _rhs(x + C2 * h, w + h * A21 * f1, k1, k3, sigma)
    f3 = _rhs(x + C3 * h, w + h * (A31 * f1 + A32 * f2), k1, k3, sigma)
    f4 = _rhs(x + C4 * h, w + h * (A41 * f1 + A42 * f2 + A43 * f3), k1, k3, sigma)
    f5 = _rhs(x + C5 * h, w + h * (A51 * f1 + A52 * f2 + A53 * f3 + A54 * f4), k1, k3, sigma)
    f6 = _rhs(x + h, w + h * (A61 * f1 + A62 * f2 + A63 * f3 + A64 * f4 + A65 * f5), k1, k3, sigma)
    w_new = w + h * (B1 * f1 + B3 * f3 + B4 * f4 + B5 * f5 + B6 * f6)
    f7 = _rhs(x + h, w_new, k1, k3, sigma)
    f_out[0] = f7
    err_out[0] = h * (E1 * f1 + E3 * f3 + E4 * f4 + E5 * f5 + E6 * f6 + E7 * f7)
    return w_new


cdef struct Stepper:
    double x
    double w
    double f1
    double h
    double direction
    long n_steps
    long max_steps
    double k1, k3, sigma, rtol, atol


cdef inline double _factor(double ratio) noexcept nogil:
    if ratio == 0.0:
        return 5.0
    return fmin(5.0, fmax(0.2, 0.9 * pow(ratio, -0.2)))


cdef bint _advance_to(Stepper* st, double x_end) noexcept nogil:
    cdef double remaining, step, w_new, f_new, err, ratio, factor
    cdef bint last
    while (x_end - st.x) * st.direction > 0.0:
        if st.n_steps >= st.max_steps:
            return False
        remaining = x_end - st.x
        last = fabs(st.h) >= fabs(remaining)
        step = remaining if last else st.h
        w_new = _dp_step(st.x, st.w, step, st.f1, st.k1, st.k3, st.sigma, &f_new, &err)
        ratio = fabs(err) / (st.atol + st.rtol * fmax(fabs(st.w), fabs(w_new)))
        st.n_steps += 1
        factor = _factor(ratio)
        if ratio <= 1.0:
            st.x = x_end if last else st.x + step
            st.w = w_new
            st.f1 = f_new
        if ratio <= 1.0 and last:
            st.h = st.direction * fmax(fabs(st.h), fabs(step) * factor)
        else:
            st.h = step * factor
    return True


def integrate_log_profile(double k1, double k3, double sigma, double x0, double w0,
                          targets, double rtol, double atol, double tail_tol,
                          double x_limit, long max_steps):
    """Integrate from ``(x0, w0)`` through monotone ``targets`` and on into the tail.

    Returns ``(w_targets, x_freeze, w_freeze, n_steps, tail_converged)``.
    """
    cdef const double[::1] tg = np.ascontiguousarray(targets, dtype=float)
    out = np.empty(tg.shape[0])
    cdef double[::1] o = out
    cdef Stepper st
    cdef Py_ssize_t i
    cdef double x_next
    cdef bint converged = False
    st.direction = 1.0 if x_limit > x0 else -1.0
    st.x = x0
    st.w = w0
    st.k1 = k1
    st.k3 = k3
    st.sigma = sigma
    st.rtol = rtol
    st.atol = atol
    st.f1 = _rhs(x0, w0, k1, k3, sigma)
    st.h = 0.05 * st.direction
    st.n_steps = 0
    st.max_steps = max_steps
    with nogil:
        for i in range(tg.shape[0]):
            if not _advance_to(&st, tg[i]):
                break
            o[i] = st.w
        else:
            while st.n_steps < st.max_steps:
                if 0.5 * fabs(st.f1) < tail_tol and fabs(st.x) >= 1.0:
                    converged = True
                    break
                if (x_limit - st.x) * st.direction <= 0.0:
                    break
                x_next = st.x + st.h
                if (x_limit - x_next) * st.direction < 0.0:
                    x_next = x_limit
                if not _advance_to(&st, x_next):
                    break
    return out, st.x, st.w, st.n_steps, bool(converged)


def continue_log_profile(double k1, double k3, double sigma, x_from, w_from, x_to,
                         double rtol, double atol):
    """Integrate many short, independent segments ``x_from -> x_to``."""
    cdef const double[::1] xa = np.ascontiguousarray(x_from, dtype=float).ravel()
    cdef const double[::1] wa = np.ascontiguousarray(w_from, dtype=float).ravel()
    cdef const double[::1] xb = np.ascontiguousarray(x_to, dtype=float).ravel()
    out = np.empty(xa.shape[0])
    cdef double[::1] o = out
    cdef Stepper st
    cdef Py_ssize_t i
    st.k1 = k1
    st.k3 = k3
    st.sigma = sigma
    st.rtol = rtol
    st.atol = atol
    st.max_steps = 100000
    with nogil:
        for i in range(xa.shape[0]):
            st.x = xa[i]
            st.w = wa[i]
            if xb[i] == xa[i]:
                o[i] = wa[i]
                continue
            st.direction = 1.0 if xb[i] > xa[i] else -1.0
            st.f1 = _rhs(st.x, st.w, k1, k3, sigma)
            st.h = (xb[i] - xa[i]) * 0.5
            st.n_steps = 0
            _advance_to(&st, xb[i])
            o[i] = st.w
    return out


def frank_density(u, grad, double k1, double k2, double k3, double k4):
    """Oseen-Frank density W for stacked states ``u`` (n, 3), ``grad`` (n, 3, 3)."""
    cdef const double[:, ::1] uu = np.ascontiguousarray(u, dtype=float)
    cdef const double[:, :, ::1] m = np.ascontiguousarray(grad, dtype=float)
    cdef Py_ssize_t n = uu.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double div, c0, c1, c2, tw, b0, b1, b2, tr2
    with nogil:
        for i in range(n):
            div = m[i, 0, 0] + m[i, 1, 1] + m[i, 2, 2]
            c0 = m[i, 2, 1] - m[i, 1, 2]
            c1 = m[i, 0, 2] - m[i, 2, 0]
            c2 = m[i, 1, 0] - m[i, 0, 1]
            tw = uu[i, 0] * c0 + uu[i, 1] * c1 + uu[i, 2] * c2
            b0 = uu[i, 1] * c2 - uu[i, 2] * c1
            b1 = uu[i, 2] * c0 - uu[i, 0] * c2
            b2 = uu[i, 0] * c1 - uu[i, 1] * c0
            tr2 = (m[i, 0, 0] * m[i, 0, 0] + m[i, 1, 1] * m[i, 1, 1] + m[i, 2, 2] * m[i, 2, 2]
                   + 2.0 * (m[i, 0, 1] * m[i, 1, 0] + m[i, 0, 2] * m[i, 2, 0] + m[i, 1, 2] * m[i, 2, 1]))
            o[i] = 0.5 * (k1 * div * div + k2 * tw * tw + k3 * (b0 * b0 + b1 * b1 + b2 * b2)
                          + (k2 + k4) * (tr2 - div * div))
    return out
