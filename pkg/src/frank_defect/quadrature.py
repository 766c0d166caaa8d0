"""Quadrature rules and finite-difference helpers shared across modules."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a: float, b: float, n: int):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _leggauss(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss(breaks, n_per_panel: int):
    """Composite Gauss-Legendre rule on consecutive panels ``breaks[i], breaks[i+1]``.

    Returns nodes, weights and the panel index of each node.
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    nodes, weights, panel = [], [], []
    for i, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])):
        x, w = gauss_legendre(a, b, n_per_panel)
        nodes.append(x)
        weights.append(w)
        panel.append(np.full(n_per_panel, i))
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(panel)


def graded_breaks(a: float, b: float, levels: int, extra=()):
    """Breakpoints on [a, b] refined geometrically (factor 2) toward both ends."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    fractions = 2.0 ** -np.arange(levels + 1)
    left = a + half * fractions
    right = b - half * fractions
    pts = np.concatenate([[a, b, mid], left, right, np.asarray(extra, dtype=float)])
    pts = pts[(pts >= a) & (pts <= b)]
    return np.unique(pts)


def theta_rule(n_per_panel: int = 10, levels: int = 22, extra=(), n_uniform: int = 16):
    """Composite Gauss rule on (0, pi) graded toward the axis.

    Nodes never touch 0 or pi.  The geometric grading resolves boundary layers
    of width down to ``pi * 2**-levels`` next to the axis; the ``n_uniform``
    equal panels underneath keep interior panels narrow.
    """
    base = np.linspace(0.0, np.pi, n_uniform + 1)
    breaks = graded_breaks(0.0, np.pi, levels, np.concatenate([base, np.asarray(extra, float)]))
    return composite_gauss(breaks, n_per_panel)


def chebyshev_lobatto(n: int):
    """``n + 1`` Chebyshev-Lobatto points on [0, pi], clustered at both ends."""
    k = np.arange(n + 1)
    theta = 0.5 * np.pi * (1.0 - np.cos(np.pi * k / n))
    theta[0], theta[-1] = 0.0, np.pi
    if n % 2 == 0:
        theta[n // 2] = 0.5 * np.pi
    return theta


def central_diff(f, x, h):
    """Fourth-order central difference of ``f`` at ``x`` with step ``h`` (broadcasting)."""
    return (f(x - 2 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2 * h)) / (12.0 * h)


def axis_tail_ratio(contrib, theta, levels: int):
    """Decay ratio of an integrand's mass next to the axis on a graded rule.

    ``contrib`` holds weighted integrand values at the ``theta`` nodes (any
    leading axes are summed).  Compares the mass within ``pi * 2**-levels`` of
    the axis against the mass within four times that distance.  A density that
    is bounded near the axis gives about 1/4; a non-integrable ``1/theta``
    density gives about 0.6.  Returns ``(ratio, outer_mass)``.
    """
    c = np.abs(np.asarray(contrib, dtype=float))
    c = c.reshape(-1, c.shape[-1]).sum(axis=0)
    dist = np.minimum(theta, np.pi - theta)
    near = 0.5 * np.pi * 2.0 ** -(levels - 1)
    outer = 4.0 * near
    inner_mass = c[dist < near].sum()
    outer_mass = c[dist < outer].sum()
    if outer_mass == 0.0:
        return 0.0, 0.0
    return inner_mass / outer_mass, outer_mass
