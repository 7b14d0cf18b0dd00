"""Hierarchic H1 shape functions on the reference triangle, orders 1..6.

Local layout for order p::

    [v0, v1, v2,
     e0: k = 2..p, e1: k = 2..p, e2: k = 2..p,
     bubbles ordered by degree]

Local edge ``i`` is opposite vertex ``i`` and runs from vertex (i+1)%3 to
(i+2)%3. Edge functions are ``l_a l_b kappa_k(l_b - l_a)`` whose trace on the
edge is the Lobatto function ``L_k``; reversing the edge direction multiplies
the mode by (-1)**k. Bubbles are ``l0 l1 l2 P_n1(l1 - l0) P_n2(2 l2 - 1)``.

Every function is stored as monomial coefficients in (xi, eta), with
l0 = 1 - xi - eta, l1 = xi, l2 = eta, so values and derivatives of any order
are exact polynomial evaluations.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial import Legendre, Polynomial
from scipy.signal import convolve2d

from .quadrature import line_rule, triangle_rule

MAX_ORDER = 6
_D = MAX_ORDER
MONOMIALS = [(a, s - a) for s in range(_D + 1) for a in range(s, -1, -1)]
_MONO_INDEX = {m: k for k, m in enumerate(MONOMIALS)}
REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def nbasis(p: int) -> int:
    return (p + 1) * (p + 2) // 2


def _check_order(p: int) -> None:
    if not 1 <= p <= MAX_ORDER:
        raise ValueError(f"polynomial order {p} outside [1, {MAX_ORDER}]")


# -- bivariate polynomial arithmetic on (D+1, D+1) coefficient grids


def _poly(terms: dict) -> np.ndarray:
    c = np.zeros((_D + 1, _D + 1))
    for (a, b), v in terms.items():
        c[a, b] = v
    return c


def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    full = convolve2d(a, b)
    out = full[: _D + 1, : _D + 1].copy()
    full[: _D + 1, : _D + 1] = 0.0
    assert not np.any(full), "degree overflow"
    return out


def _compose(q: Polynomial, x: np.ndarray) -> np.ndarray:
    """q(x) for a univariate polynomial q and bivariate polynomial x."""
    out = _poly({(0, 0): q.coef[-1]})
    for c in q.coef[-2::-1]:
        out = _mul(out, x)
        out[0, 0] += c
    return out


_L = [_poly({(0, 0): 1.0, (1, 0): -1.0, (0, 1): -1.0}), _poly({(1, 0): 1.0}), _poly({(0, 1): 1.0})]


@lru_cache(maxsize=None)
def lobatto_kernel(k: int) -> Polynomial:
    """kappa_k with (1 - x^2)/4 * kappa_k(x) = L_k(x), L_k the k-th Lobatto function."""
    P = [Legendre.basis(n).convert(kind=Polynomial) for n in (k, k - 2)]
    Lk = (P[0] - P[1]) / math.sqrt(2.0 * (2 * k - 1))
    q, r = divmod(Lk, Polynomial([1.0, 0.0, -1.0]))
    assert np.allclose(r.coef, 0.0, atol=1e-13)
    return 4.0 * q


def _grid_to_mono(c: np.ndarray) -> np.ndarray:
    return np.array([c[a, b] for a, b in MONOMIALS])


@lru_cache(maxsize=None)
def basis_layout(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Monomial coefficients (nb, n_mono) and polynomial degree (nb,) of each function."""
    _check_order(p)
    funcs, degree = [], []
    for i in range(3):
        funcs.append(_L[i])
        degree.append(1)
    for i in range(3):
        a, b = (i + 1) % 3, (i + 2) % 3
        lab = _mul(_L[a], _L[b])
        x = _L[b] - _L[a]
        for k in range(2, p + 1):
            funcs.append(_mul(lab, _compose(lobatto_kernel(k), x)))
            degree.append(k)
    if p >= 3:
        cube = _mul(_mul(_L[0], _L[1]), _L[2])
        x1 = _L[1] - _L[0]
        x2 = 2.0 * _L[2] - _poly({(0, 0): 1.0})
        for n in range(p - 2):
            for n1 in range(n, -1, -1):
                n2 = n - n1
                f = _mul(cube, _compose(Legendre.basis(n1).convert(kind=Polynomial), x1))
                f = _mul(f, _compose(Legendre.basis(n2).convert(kind=Polynomial), x2))
                funcs.append(f)
                degree.append(n + 3)
    C = np.array([_grid_to_mono(f) for f in funcs])
    deg = np.array(degree)
    assert len(C) == nbasis(p)
    C.setflags(write=False)
    deg.setflags(write=False)
    return C, deg


def _derivative_matrix(axis: int) -> np.ndarray:
    """Matrix T with coeffs(d f / d axis) = coeffs(f) @ T."""
    n = len(MONOMIALS)
    T = np.zeros((n, n))
    for k, (a, b) in enumerate(MONOMIALS):
        if axis == 0 and a > 0:
            T[k, _MONO_INDEX[(a - 1, b)]] = a
        elif axis == 1 and b > 0:
            T[k, _MONO_INDEX[(a, b - 1)]] = b
    return T


_DX = _derivative_matrix(0)
_DY = _derivative_matrix(1)


def _monomials(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    xp = np.stack([xi**a for a in range(_D + 1)], axis=-1)
    ep = np.stack([eta**b for b in range(_D + 1)], axis=-1)
    return np.stack([xp[..., a] * ep[..., b] for a, b in MONOMIALS], axis=-1)


def edge_slots(p: int, i: int) -> np.ndarray:
    """Local indices of the k = 2..p modes of local edge ``i``."""
    return 3 + i * (p - 1) + np.arange(p - 1)


def bubble_slots(p: int) -> np.ndarray:
    return np.arange(3 + 3 * (p - 1), nbasis(p))


def reference_basis(p: int, point, hessian: bool = False):
    """Values and reference gradients of all order-<=p shape functions.

    Parameters
    ----------
    p : int
        Polynomial order, 1..6.
    point : array_like, shape (3,) or (n, 3)
        Barycentric coordinates (l0, l1, l2).
    hessian : bool
        Also return second derivatives (d2/dxi2, d2/dxi deta, d2/deta2).

    Returns
    -------
    values : (n, nb) array
    grads : (n, nb, 2) array, derivatives w.r.t. (xi, eta)
    hess : (n, nb, 3) array, only when ``hessian`` is true
    """
    _check_order(p)
    bary = np.asarray(point, dtype=float)
    single = bary.ndim == 1
    bary = np.atleast_2d(bary)
    if bary.shape[-1] != 3:
        raise ValueError("barycentric points must have three components")
    out = _eval(p, bary[:, 1], bary[:, 2], hessian)
    if single:
        out = tuple(o[0] for o in out)
    return out


def _eval(p: int, xi, eta, hessian=False):
    C, _ = basis_layout(p)
    M = _monomials(np.asarray(xi, float), np.asarray(eta, float))
    vals = M @ C.T
    CX, CY = C @ _DX, C @ _DY
    grads = np.stack([M @ CX.T, M @ CY.T], axis=-1)
    if not hessian:
        return vals, grads
    hess = np.stack([M @ (CX @ _DX).T, M @ (CX @ _DY).T, M @ (CY @ _DY).T], axis=-1)
    return vals, grads, hess


@lru_cache(maxsize=None)
def volume_tables(p: int, order: int):
    """Basis tables at the points of ``triangle_rule(order)``.

    Returns (points, weights, values (nq, nb), grads (nq, nb, 2), hess (nq, nb, 3)).
    """
    pts, w = triangle_rule(order)
    vals, grads, hess = _eval(p, pts[:, 0], pts[:, 1], hessian=True)
    for a in (vals, grads, hess):
        a.setflags(write=False)
    return pts, w, vals, grads, hess


@lru_cache(maxsize=None)
def edge_tables(p: int, i: int, npts: int):
    """Basis tables along local edge ``i`` at ``line_rule(npts)``, oriented (i+1) -> (i+2).

    Returns (s, weights, ref points (n, 2), values (n, nb), grads (n, nb, 2)).
    """
    s, w = line_rule(npts)
    a, b = REF_VERTICES[(i + 1) % 3], REF_VERTICES[(i + 2) % 3]
    pts = a[None, :] + s[:, None] * (b - a)[None, :]
    vals, grads = _eval(p, pts[:, 0], pts[:, 1])
    for arr in (pts, vals, grads):
        arr.setflags(write=False)
    return s, w, pts, vals, grads
