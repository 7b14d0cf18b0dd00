"""Quadrature on the reference triangle {(xi, eta): xi, eta >= 0, xi + eta <= 1}.

Collapsed (Duffy) product rules: Gauss-Jacobi(1, 0) in the collapsed
direction times Gauss-Legendre in the other. Weights are positive and all
points are strictly interior, so r = 0 is never sampled on axis elements.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_ORDER = 14


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Points (n, 2) and weights (n,) exact for total degree <= ``order``."""
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"quadrature order {order} outside [1, {MAX_ORDER}]")
    n = (order + 2) // 2
    # eta direction carries the (1 - eta) Jacobian of the collapse
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    eta = (tj + 1.0) / 2.0
    w_eta = wj / 4.0
    tl, wl = roots_legendre(n)
    u = (tl + 1.0) / 2.0
    w_u = wl / 2.0
    U, E = np.meshgrid(u, eta, indexing="ij")
    W = np.outer(w_u, w_eta)
    pts = np.column_stack([(U * (1.0 - E)).ravel(), E.ravel()])
    pts.setflags(write=False)
    w = W.ravel()
    w.setflags(write=False)
    return pts, w


@lru_cache(maxsize=None)
def line_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre on [0, 1]: n points, exact to degree 2n - 1."""
    t, w = roots_legendre(n)
    s = (t + 1.0) / 2.0
    w = w / 2.0
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


def quadrature(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Points as barycentric triples (n, 3) and weights (n,) on the unit reference triangle."""
    pts, w = triangle_rule(order)
    bary = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    return bary, w.copy()
