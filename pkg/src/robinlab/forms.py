"""Coefficient fields, P1 assembly of the Robin form and structural checks."""
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .expressions import as_field
from .quadrature import barycentric, gauss_interval, reference_rule


def _vector_field(spec, dim):
    """Normalise a drift specification to a callable returning (n, dim)."""
    if spec is None:
        spec = 0.0
    if callable(spec) and not isinstance(spec, str):
        def fn(x):
            v = np.asarray(spec(x), dtype=float)
            if v.ndim == 1:
                v = np.repeat(v[:, None], dim, axis=1)
            return v
        return fn
    if np.isscalar(spec) or isinstance(spec, str):
        comps = [as_field(spec)] * dim
    else:
        if len(spec) != dim:
            raise ValueError(f"drift needs {dim} components, got {len(spec)}")
        comps = [as_field(s) for s in spec]

    def fn(x):
        return np.column_stack([f(x) for f in comps])

    return fn


def _matrix_field(spec, dim):
    if spec is None:
        spec = 1.0
    if callable(spec) and not isinstance(spec, str):
        def fn(x):
            v = np.asarray(spec(x), dtype=float)
            if v.ndim == 1:
                v = v[:, None, None] * np.eye(dim)
            return v
        return fn
    if np.isscalar(spec) or isinstance(spec, str):
        s = as_field(spec)
        return lambda x: s(x)[:, None, None] * np.eye(dim)
    rows = [[as_field(e) for e in row] for row in spec]
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise ValueError(f"diffusion matrix must be {dim}x{dim}")

    def fn(x):
        out = np.empty((np.atleast_2d(x).shape[0], dim, dim))
        for i in range(dim):
            for j in range(dim):
                out[:, i, j] = rows[i][j](x)
        return out

    return fn


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients of the operator and the Robin weight.

    ``a`` is the diffusion matrix, ``b`` the conormal drift, ``c`` the
    advection, ``d`` the reaction and ``beta`` the Robin weight.  Each entry
    may be a number, an expression string or a callable of the point array.
    ``beta`` may instead be a callable ``beta(x, normals)`` when
    ``beta_uses_normal`` is set.  ``mu`` is the claimed ellipticity constant.
    """

    a: object = 1.0
    b: object = 0.0
    c: object = 0.0
    d: object = 0.0
    beta: object = 0.0
    mu: float = 1.0
    beta_uses_normal: bool = False
    name: str = "custom"

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("ellipticity constant mu must be positive")

    def evaluate(self, x, dim):
        x = np.atleast_2d(x)
        a = _matrix_field(self.a, dim)(x)
        b = _vector_field(self.b, dim)(x)
        c = _vector_field(self.c, dim)(x)
        d = as_field(self.d)(x)
        return a, b, c, d

    def beta_at(self, x, normals):
        if self.beta_uses_normal:
            return np.asarray(self.beta(x, normals), dtype=float)
        return as_field(self.beta)(x)

    def is_zero(self, which):
        v = getattr(self, which)
        return not callable(v) and not isinstance(v, str) and np.all(np.asarray(v, dtype=float) == 0)


def _drift_beta(gamma):
    def beta(x, normals):
        return -gamma * normals.sum(axis=1)

    return beta


def coefficient_preset(spec, **overrides):
    """Build a named preset.

    Recognised: ``laplacian``, ``anisotropic(a11,a22)``,
    ``drift_conserving(gamma)``, ``drift_balanced(gamma)``, ``reaction(d)``,
    ``robin(beta)``.
    """
    m = re.fullmatch(r"\s*(\w+)\s*(?:\((.*)\))?\s*", spec)
    if not m:
        raise ValueError(f"cannot parse coefficient preset {spec!r}")
    name, argstr = m.group(1), m.group(2)
    args = [float(s) for s in argstr.split(",")] if argstr and argstr.strip() else []

    def need(n):
        if len(args) != n:
            raise ValueError(f"preset {name!r} takes {n} argument(s), got {len(args)}")

    if name == "laplacian":
        need(0)
        kw = dict(name=spec)
    elif name == "anisotropic":
        need(2)
        a11, a22 = args
        if min(a11, a22) <= 0:
            raise ValueError("anisotropic diffusion must be positive")
        kw = dict(a=lambda x: np.tile(np.diag([a11, a22])[: x.shape[1], : x.shape[1]], (x.shape[0], 1, 1)),
                  mu=min(a11, a22), name=spec)
    elif name == "drift_conserving":
        need(1)
        (g,) = args
        kw = dict(c=g, beta=_drift_beta(g), beta_uses_normal=True, name=spec)
    elif name == "drift_balanced":
        need(1)
        (g,) = args
        kw = dict(b=g, c=g, beta=_drift_beta(g), beta_uses_normal=True, name=spec)
    elif name == "reaction":
        need(1)
        kw = dict(d=args[0], name=spec)
    elif name == "robin":
        need(1)
        kw = dict(beta=args[0], name=spec)
    else:
        raise ValueError(f"unknown coefficient preset {name!r}")
    kw.update(overrides)
    return CoefficientSet(**kw)


# -- assembly ----------------------------------------------------------------


@dataclass(eq=False)
class AssembledSystem:
    """Mass, boundary mass and form matrices of one mesh/coefficient pair.

    ``K[i, j]`` equals the Robin form evaluated at (trial φ_j, test φ_i), so
    ``v @ K @ u`` is the form at (u, v).  ``Kg`` is the plain gradient
    stiffness and ``parts`` holds the separate contributions of a, b, c, d
    and beta.
    """

    mesh: object
    coeffs: CoefficientSet
    M: sp.csr_matrix
    Mb: sp.csr_matrix
    K: sp.csr_matrix
    Kg: sp.csr_matrix
    parts: dict
    quad_order: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def ndof(self):
        return self.M.shape[0]

    @property
    def ones(self):
        return np.ones(self.ndof)

    @property
    def mu(self):
        return self.coeffs.mu

    def is_symmetric(self, tol=1e-12):
        D = self.K - self.K.T
        return abs(D).max() <= tol * max(1.0, abs(self.K).max())

    def mass(self, u):
        """Integral of a nodal function over the domain."""
        return float(self.ones @ (self.M @ u))

    def l2_norm(self, u):
        return float(np.sqrt(max(np.real(np.vdot(u, self.M @ u)), 0.0)))

    def boundary_l2_norm(self, u):
        return float(np.sqrt(max(np.real(np.vdot(u, self.Mb @ u)), 0.0)))

    def h1_seminorm(self, u):
        return float(np.sqrt(max(np.real(np.vdot(u, self.Kg @ u)), 0.0)))

    def h1_gram(self):
        if "H" not in self._cache:
            self._cache["H"] = (self.M + self.Kg).tocsc()
        return self._cache["H"]

    def dual_norm(self, r):
        """Norm of the functional ``v -> v @ r`` dual to the discrete H^1 norm."""
        if "H_lu" not in self._cache:
            self._cache["H_lu"] = spla.splu(self.h1_gram())
        z = self._cache["H_lu"].solve(np.asarray(r, dtype=float))
        return float(np.sqrt(max(r @ z, 0.0)))

    def nodal(self, field, t=0.0):
        """Interpolate a callable / expression / constant at the vertices."""
        if isinstance(field, np.ndarray) and field.shape == (self.ndof,):
            return field.astype(float)
        fn = as_field(field)
        try:
            return np.asarray(fn(self.mesh.vertices, t), dtype=float)
        except TypeError:
            return np.asarray(fn(self.mesh.vertices), dtype=float)


def _cell_geometry(mesh):
    X = mesh.vertices[mesh.cells]
    if mesh.dim == 1:
        L = X[:, 1, 0] - X[:, 0, 0]
        G = np.stack([-1.0 / L, 1.0 / L], axis=1)[:, :, None]
        J = L[:, None, None]
        det = L
    else:
        J = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=2)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        Jinv = np.linalg.inv(J)
        Gref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        G = np.einsum("ik,ekl->eil", Gref, Jinv)
    return X, J, np.abs(det), G


def cell_quadrature(mesh, order):
    """Physical quadrature points (nc, nq, dim), weights (nc, nq) and basis values (nq, nv)."""
    key = ("cellq", order)
    if key not in mesh._cache:
        X, J, det, G = _cell_geometry(mesh)
        ref, w = reference_rule(mesh.dim, order)
        pts = X[:, 0][:, None, :] + np.einsum("ekl,ql->eqk", J, ref)
        W = det[:, None] * w[None, :]
        mesh._cache[key] = (pts, W, barycentric(ref), G)
    return mesh._cache[key]


def facet_quadrature(mesh, order):
    """Boundary quadrature: points (nb, nq, dim), weights (nb, nq), basis values (nq, nfv)."""
    key = ("facetq", order)
    if key not in mesh._cache:
        P = mesh.vertices[mesh.facets]
        if mesh.dim == 1:
            pts = P.copy()
            W = np.ones((mesh.nfacets, 1))
            Phi = np.ones((1, 1))
        else:
            s, w = gauss_interval(order)
            pts = P[:, 0][:, None, :] + s[None, :, None] * (P[:, 1] - P[:, 0])[:, None, :]
            W = mesh.facet_measures[:, None] * w[None, :]
            Phi = np.column_stack([1.0 - s, s])
        mesh._cache[key] = (pts, W, Phi)
    return mesh._cache[key]


def _scatter(conn, loc, n):
    nv = conn.shape[1]
    rows = np.repeat(conn, nv, axis=1).ravel()
    cols = np.tile(conn, (1, nv)).ravel()
    return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble(mesh, coeffs, quad_order=4):
    """Assemble mass, boundary mass and Robin-form matrices on P1 elements."""
    if int(quad_order) != quad_order or quad_order < 1:
        raise ValueError(f"quad_order must be a positive integer, got {quad_order!r}")
    dim = mesh.dim
    pts, W, Phi, G = cell_quadrature(mesh, quad_order)
    nc, nq, _ = pts.shape
    flat = pts.reshape(-1, dim)
    try:
        a, b, c, d = coeffs.evaluate(flat, dim)
    except Exception as exc:
        raise ValueError(f"coefficient evaluation failed: {exc}") from exc
    vals = [a.reshape(nc, nq, dim, dim), b.reshape(nc, nq, dim), c.reshape(nc, nq, dim), d.reshape(nc, nq)]
    if not all(np.all(np.isfinite(v)) for v in vals):
        raise ValueError("coefficient fields returned non-finite values")
    Ka, Kb, Kc, Kd, Ml, Kgl = _kernels.local_matrices(G, Phi, W, *vals)
    n = mesh.nvertices
    cells = mesh.cells
    parts = {
        "a": _scatter(cells, Ka, n),
        "b": _scatter(cells, Kb, n),
        "c": _scatter(cells, Kc, n),
        "d": _scatter(cells, Kd, n),
    }
    M = _scatter(cells, Ml, n)
    Kg = _scatter(cells, Kgl, n)

    fpts, fW, fPhi = facet_quadrature(mesh, quad_order)
    nb, fq, _ = fpts.shape
    normals = np.repeat(mesh.normals, fq, axis=0)
    beta = coeffs.beta_at(fpts.reshape(-1, dim), normals).reshape(nb, fq)
    if not np.all(np.isfinite(beta)):
        raise ValueError("Robin weight returned non-finite values")
    Mbl = np.einsum("fq,qi,qj->fij", fW, fPhi, fPhi)
    Kbl = np.einsum("fq,qi,qj->fij", fW * beta, fPhi, fPhi)
    Mb = _scatter(mesh.facets, Mbl, n)
    parts["beta"] = _scatter(mesh.facets, Kbl, n)
    K = (parts["a"] + parts["b"] + parts["c"] + parts["d"] + parts["beta"]).tocsr()
    return AssembledSystem(mesh=mesh, coeffs=coeffs, M=M, Mb=Mb, K=K, Kg=Kg, parts=parts, quad_order=quad_order)


# -- structural checks -------------------------------------------------------


def direction_panel(dim, count=16):
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    th = np.pi * np.arange(count) / count
    return np.column_stack([np.cos(th), np.sin(th)])


def check_ellipticity(coeffs, mesh, directions=None, quad_order=4):
    """Smallest value of xi^T a xi - mu |xi|^2 over quadrature points and directions."""
    if directions is None:
        directions = direction_panel(mesh.dim)
    xi = np.atleast_2d(np.asarray(directions, dtype=float))
    if xi.size == 0:
        raise ValueError("direction panel is empty")
    pts, _, _, _ = cell_quadrature(mesh, quad_order)
    a, _, _, _ = coeffs.evaluate(pts.reshape(-1, mesh.dim), mesh.dim)
    quad = np.einsum("pk,nkl,pl->np", xi, a, xi)
    return float(np.min(quad - coeffs.mu * np.sum(xi * xi, axis=1)[None, :]))


def _smallest_generalized_eig(A, B, dense_limit=3000):
    n = A.shape[0]
    if n <= dense_limit:
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
        Bd = B.toarray() if sp.issparse(B) else np.asarray(B)
        return float(scipy.linalg.eigh(Ad, Bd, eigvals_only=True, subset_by_index=[0, 0])[0])
    try:
        lu = spla.splu(sp.csc_matrix(B))
        Binv = spla.LinearOperator(B.shape, matvec=lu.solve)
        vals = spla.eigsh(A, k=1, M=B, Minv=Binv, which="SA", maxiter=20 * n, tol=1e-10)[0]
    except spla.ArpackNoConvergence as exc:
        raise RuntimeError("generalized eigen-solver did not converge") from exc
    return float(vals[0])


def estimate_garding(system):
    """Return (mu/2, omega) with omega the smallest shift making the
    discrete form dominate (mu/2) times the Dirichlet energy."""
    mu = system.coeffs.mu
    A = 0.5 * (system.K + system.K.T) - 0.5 * mu * system.Kg
    lam = _smallest_generalized_eig(A, system.M)
    return 0.5 * mu, max(0.0, -lam)


def check_conservation_condition(system, coeffs=None):
    """Largest normalised value of the form at (basis function, constant 1).

    Zero certifies that every discrete solution conserves total mass up to
    the supplied sources."""
    r = system.K.T @ system.ones
    norms = np.sqrt(system.M.diagonal() + system.Kg.diagonal())
    return float(np.max(np.abs(r) / norms))


def check_fixedpoint_condition(system, coeffs=None):
    """Dual H^1 norm of K·1; zero means constants are discrete equilibria."""
    return system.dual_norm(system.K @ system.ones)


def poincare_trace_constant(system):
    """Smallest c1 with ||u||^2 + ||u||_bd^2 <= c1 ||grad u||^2 for mean-zero u."""
    key = "poincare"
    if key not in system._cache:
        m = system.M @ system.ones
        basis = scipy.linalg.null_space(m[None, :])
        A = basis.T @ (system.Kg @ basis)
        B = basis.T @ ((system.M + system.Mb) @ basis)
        lam = scipy.linalg.eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])[0]
        system._cache[key] = 1.0 / float(lam)
    return system._cache[key]


def decay_time_constant(system):
    """Decay time tau = c1 / mu of the mean-zero L^2 energy.

    From d/dt ||u||^2 <= -2 mu ||grad u||^2 <= -(2 mu / c1)(||u||^2 + ||u||_bd^2)
    the energy decays at least like exp(-t / tau) for any tau >= c1 / mu.
    """
    return poincare_trace_constant(system) / system.coeffs.mu
