"""Spatial and space-time norms of P1 functions by positive-weight quadrature."""
import numpy as np
from scipy.integrate import trapezoid

from .forms import cell_quadrature, facet_quadrature


def _quad_values(mesh, values, boundary, order):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if boundary:
        _, W, Phi = facet_quadrature(mesh, order)
        conn = mesh.facets
    else:
        _, W, Phi, _ = cell_quadrature(mesh, order)
        conn = mesh.cells
    # (nt, ncell, nq)
    vq = np.einsum("tev,qv->teq", values[:, conn], Phi)
    return vq, W


def lq_norms(mesh, values, q, boundary=False, order=4):
    """L^q norm of each row of ``values`` (nodal vectors) over the domain or its boundary.

    Boundary points of the interval carry unit weight.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    vq, W = _quad_values(mesh, values, boundary, order)
    integ = np.einsum("teq,eq->t", np.abs(vq) ** q, W)
    return integ ** (1.0 / q)


def sup_norms(values):
    return np.max(np.abs(np.atleast_2d(values)), axis=1)


def time_lr(times, profile, r):
    """(∫ profile(t)^r dt)^(1/r) by the trapezoid rule."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        return 0.0
    return float(trapezoid(np.asarray(profile) ** r, times) ** (1.0 / r))


def mixed_norm(mesh, times, values, r, q, boundary=False, order=4):
    """Norm in L^r(time; L^q(space)) of nodal samples on ``times``."""
    return time_lr(times, lq_norms(mesh, values, q, boundary, order), r)


def signal_mixed_norm(system, signal, times, r, q, boundary=None, order=4):
    if signal is None or signal.is_zero:
        return 0.0
    if boundary is None:
        boundary = signal.target == "boundary"
    return mixed_norm(system.mesh, times, signal.sample(system, times), r, q, boundary, order)
