"""Reference-element quadrature rules."""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_interval(order):
    """Gauss-Legendre rule on [0, 1] exact for polynomials of degree ``order``."""
    n = max(1, (order + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_triangle(order):
    """Collapsed (Duffy) Gauss rule on the reference triangle (0,0),(1,0),(0,1).

    The collapse adds one degree in the first direction, hence ``order + 1``.
    Returns points of shape (nq, 2) and weights summing to 1/2.
    """
    s, ws = gauss_interval(order + 1)
    t, wt = gauss_interval(order)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt) * (1.0 - S)
    pts = np.column_stack([S.ravel(), (T * (1.0 - S)).ravel()])
    return pts, W.ravel()


def reference_rule(dim, order):
    if dim == 1:
        x, w = gauss_interval(order)
        return x[:, None], w
    if dim == 2:
        return gauss_triangle(order)
    raise ValueError(f"unsupported dimension {dim}")


def barycentric(points):
    """P1 basis values at reference points, shape (nq, dim + 1)."""
    points = np.atleast_2d(points)
    return np.column_stack([1.0 - points.sum(axis=1), points])
