"""Per-cell numeric kernels.

Every kernel has a numba loop version and a vectorised numpy version with
identical results; :func:`local_matrices` and :func:`superlevel_cells`
dispatch on :func:`robinlab._accel.use_numba`.
"""
import numpy as np

from ._accel import njit, use_numba

# -- local P1 matrices -------------------------------------------------------


def local_matrices_numpy(G, Phi, W, a, b, c, d):
    """Local element matrices for the pieces of the form.

    G: (nc, nv, dim) basis gradients; Phi: (nq, nv) basis values;
    W: (nc, nq) physical quadrature weights; a: (nc, nq, dim, dim);
    b, c: (nc, nq, dim); d: (nc, nq).
    Row index = test function, column index = trial function.
    """
    abar = np.einsum("eq,eqkl->ekl", W, a)
    Ka = np.einsum("ekl,ejk,eil->eij", abar, G, G)
    bq = np.einsum("eq,qj,eql->ejl", W, Phi, b)
    Kb = np.einsum("ejl,eil->eij", bq, G)
    cq = np.einsum("eq,qi,eqk->eik", W, Phi, c)
    Kc = np.einsum("eik,ejk->eij", cq, G)
    Kd = np.einsum("eq,qi,qj->eij", W * d, Phi, Phi)
    Mloc = np.einsum("eq,qi,qj->eij", W, Phi, Phi)
    area = W.sum(axis=1)
    Kg = np.einsum("e,eik,ejk->eij", area, G, G)
    return Ka, Kb, Kc, Kd, Mloc, Kg


@njit(cache=True)
def local_matrices_numba(G, Phi, W, a, b, c, d):
    nc, nv, dim = G.shape
    nq = Phi.shape[0]
    Ka = np.zeros((nc, nv, nv))
    Kb = np.zeros((nc, nv, nv))
    Kc = np.zeros((nc, nv, nv))
    Kd = np.zeros((nc, nv, nv))
    Mloc = np.zeros((nc, nv, nv))
    Kg = np.zeros((nc, nv, nv))
    for e in range(nc):
        area = 0.0
        for q in range(nq):
            area += W[e, q]
        for i in range(nv):
            for j in range(nv):
                gg = 0.0
                for k in range(dim):
                    gg += G[e, i, k] * G[e, j, k]
                Kg[e, i, j] = area * gg
        for q in range(nq):
            w = W[e, q]
            for i in range(nv):
                for j in range(nv):
                    aij = 0.0
                    bj = 0.0
                    ci = 0.0
                    for k in range(dim):
                        bj += b[e, q, k] * G[e, i, k]
                        ci += c[e, q, k] * G[e, j, k]
                        for l in range(dim):
                            aij += a[e, q, k, l] * G[e, j, k] * G[e, i, l]
                    pij = Phi[q, i] * Phi[q, j]
                    Ka[e, i, j] += w * aij
                    Kb[e, i, j] += w * Phi[q, j] * bj
                    Kc[e, i, j] += w * ci * Phi[q, i]
                    Kd[e, i, j] += w * d[e, q] * pij
                    Mloc[e, i, j] += w * pij
    return Ka, Kb, Kc, Kd, Mloc, Kg


def local_matrices(G, Phi, W, a, b, c, d):
    args = [np.ascontiguousarray(v, dtype=float) for v in (G, Phi, W, a, b, c, d)]
    if use_numba():
        return local_matrices_numba(*args)
    return local_matrices_numpy(*args)


# -- superlevel sets of P1 functions -----------------------------------------
#
# For a linear function on a simplex with vertex values v, return the measure
# of {v > k} and the integral of ((v - k)^+)^2, both exact.


def superlevel_cells_numpy(vals, measures, k):
    vals = np.sort(vals, axis=1) - k
    nv = vals.shape[1]
    meas = np.zeros(vals.shape[0])
    sq = np.zeros(vals.shape[0])
    if nv == 1:
        above = vals[:, 0] > 0
        meas[above] = measures[above]
        return meas, sq
    if nv == 2:
        lo, hi = vals[:, 0], vals[:, 1]
        full = lo >= 0
        part = (lo < 0) & (hi > 0)
        meas[full] = measures[full]
        sq[full] = measures[full] * (lo[full] ** 2 + lo[full] * hi[full] + hi[full] ** 2) / 3.0
        frac = hi[part] / (hi[part] - lo[part])
        meas[part] = measures[part] * frac
        sq[part] = meas[part] * hi[part] ** 2 / 3.0
        return meas, sq
    v0, v1, v2 = vals[:, 0], vals[:, 1], vals[:, 2]
    full = v0 >= 0
    two = (v0 < 0) & (v1 > 0)
    one = (v1 <= 0) & (v2 > 0)
    A = measures
    s2 = (v0 ** 2 + v1 ** 2 + v2 ** 2 + v0 * v1 + v1 * v2 + v0 * v2) / 6.0
    meas[full] = A[full]
    sq[full] = A[full] * s2[full]
    # region above is the cell minus the corner triangle at v0
    with np.errstate(divide="ignore", invalid="ignore"):
        corner = A * v0 ** 2 / ((v1 - v0) * (v2 - v0))
        tip = A * v2 ** 2 / ((v2 - v0) * (v2 - v1))
    meas[two] = A[two] - corner[two]
    sq[two] = A[two] * s2[two] - corner[two] * v0[two] ** 2 / 6.0
    meas[one] = tip[one]
    sq[one] = tip[one] * v2[one] ** 2 / 6.0
    return meas, sq


@njit(cache=True)
def superlevel_cells_numba(vals, measures, k):
    nc, nv = vals.shape
    meas = np.zeros(nc)
    sq = np.zeros(nc)
    for e in range(nc):
        A = measures[e]
        if nv == 1:
            if vals[e, 0] - k > 0:
                meas[e] = A
        elif nv == 2:
            lo = min(vals[e, 0], vals[e, 1]) - k
            hi = max(vals[e, 0], vals[e, 1]) - k
            if lo >= 0:
                meas[e] = A
                sq[e] = A * (lo * lo + lo * hi + hi * hi) / 3.0
            elif hi > 0:
                meas[e] = A * hi / (hi - lo)
                sq[e] = meas[e] * hi * hi / 3.0
        else:
            # three-element sorting network, no allocation
            v0, v1, v2 = vals[e, 0] - k, vals[e, 1] - k, vals[e, 2] - k
            if v0 > v1:
                v0, v1 = v1, v0
            if v1 > v2:
                v1, v2 = v2, v1
            if v0 > v1:
                v0, v1 = v1, v0
            s2 = (v0 * v0 + v1 * v1 + v2 * v2 + v0 * v1 + v1 * v2 + v0 * v2) / 6.0
            if v0 >= 0:
                meas[e] = A
                sq[e] = A * s2
            elif v1 > 0:
                corner = A * v0 * v0 / ((v1 - v0) * (v2 - v0))
                meas[e] = A - corner
                sq[e] = A * s2 - corner * v0 * v0 / 6.0
            elif v2 > 0:
                tip = A * v2 * v2 / ((v2 - v0) * (v2 - v1))
                meas[e] = tip
                sq[e] = tip * v2 * v2 / 6.0
    return meas, sq


def superlevel_cells(vals, measures, k):
    vals = np.ascontiguousarray(vals, dtype=float)
    measures = np.ascontiguousarray(measures, dtype=float)
    if use_numba():
        return superlevel_cells_numba(vals, measures, float(k))
    return superlevel_cells_numpy(vals, measures, float(k))
