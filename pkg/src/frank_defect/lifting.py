"""Liftings ``psi(r, theta)`` of O(2)-equivariant directors, sampled with derivatives.

Every lifting exposes ``sample(r, theta) -> FieldSamples`` with ``psi``, its
two partial derivatives and ``chi = sin(psi)/sin(theta)``.  ``chi`` is always
produced without dividing by a vanishing ``sin(theta)``, which is what lets
the reduced energy integrate the ``csc^2`` term as ``chi^2 sin(theta)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FieldSamples:
    psi: np.ndarray
    psi_r: np.ndarray
    psi_theta: np.ndarray
    chi: np.ndarray


class RadialLifting:
    """``psi(r, theta) = profile(theta)``; works for solved and analytic profiles."""

    def __init__(self, profile):
        self.profile = profile

    def sample(self, r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        flat = theta.ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        psi, dpsi, chi = (v[inv].reshape(theta.shape) for v in self.profile.evaluate(uniq))
        return FieldSamples(psi, np.zeros_like(psi), dpsi, chi)

    def trace(self, theta):
        return self.profile.evaluate(np.asarray(theta, float))[0]


class AnalyticLifting:
    """Closed-form ``psi`` with its partials; ``chi`` from L'Hopital on the axis."""

    def __init__(self, psi, psi_r, psi_theta, chi=None):
        self._psi, self._psi_r, self._psi_theta, self._chi = psi, psi_r, psi_theta, chi

    def sample(self, r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        ones = np.ones_like(theta)
        psi = self._psi(r, theta) * ones
        pr = self._psi_r(r, theta) * ones
        pt = self._psi_theta(r, theta) * ones
        if self._chi is not None:
            chi = self._chi(r, theta) * ones
        else:
            s = np.sin(theta)
            on_axis = s == 0.0
            chi = np.where(
                on_axis, np.cos(psi) * pt / np.cos(theta), np.sin(psi) / np.where(on_axis, 1.0, s)
            )
        return FieldSamples(psi, pr, pt, chi)

    def trace(self, theta):
        return self.sample(1.0, theta).psi


class SumLifting:
    """``base + eps * phi`` where ``phi`` exposes ``sample(r, theta) -> (phi, phi_r, phi_theta)``.

    ``chi`` uses ``sin(a + b) = sin a cos b + cos a sin b`` so the base
    lifting's regularised ratio carries over to the axis.
    """

    def __init__(self, base, phi, eps: float = 1.0):
        self.base = base
        self.phi = phi
        self.eps = eps

    def sample(self, r, theta):
        b = self.base.sample(r, theta)
        p, pr, pt = self.phi.sample(r, theta)
        d = self.eps * p
        s = np.sin(theta)
        on_axis = s == 0.0
        ratio = np.where(on_axis, 0.0, np.sin(d) / np.where(on_axis, 1.0, s))
        chi = b.chi * np.cos(d) + np.cos(b.psi) * ratio
        return FieldSamples(b.psi + d, b.psi_r + self.eps * pr, b.psi_theta + self.eps * pt, chi)

    def trace(self, theta):
        return self.sample(1.0, np.asarray(theta, float)).psi
