"""Quadrature on the reference interval and triangle in barycentric form."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def simplex_rule(d: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule exact for polynomials of total degree ``order`` on the reference simplex.

    Returns barycentric points ``(nq, d+1)`` and weights summing to ``1/d!``.
    The triangle rule is a collapsed (Duffy) product of Gauss-Jacobi and
    Gauss-Legendre points.
    """
    if order < 0:
        raise ValueError("quadrature order must be non-negative")
    n = order // 2 + 1
    t, wt = roots_legendre(n)
    x = (t + 1) / 2
    wx = wt / 2
    if d == 1:
        lam = np.column_stack([1 - x, x])
        w = wx
    elif d == 2:
        s, ws = roots_jacobi(n, 1.0, 0.0)
        u = (s + 1) / 2
        wu = ws / 4
        U, V = np.meshgrid(u, x, indexing="ij")
        W = np.outer(wu, wx)
        px = U.ravel()
        py = ((1 - U) * V).ravel()
        lam = np.column_stack([1 - px - py, px, py])
        w = W.ravel()
    else:
        raise ValueError(f"quadrature only implemented for d in (1, 2), got {d}")
    lam.flags.writeable = False
    w.flags.writeable = False
    return lam, w


@lru_cache(maxsize=None)
def gauss_interval(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``n``-point Gauss-Legendre rule on ``[0, 1]``."""
    t, w = roots_legendre(n)
    x, w = (t + 1) / 2, w / 2
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w
