"""Simplicial meshes of the unit interval and of 2D polygons."""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming P1 mesh with tagged boundary facets.

    ``facets[i]`` holds the vertex indices of boundary facet ``i``,
    ``facet_cells[i]`` the cell it belongs to, ``facet_local[i]`` the local
    index of the cell vertex opposite to it, and ``normals[i]`` its outward
    unit normal.
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    facet_cells: np.ndarray
    facet_local: np.ndarray
    normals: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nvertices(self):
        return self.vertices.shape[0]

    @property
    def ncells(self):
        return self.cells.shape[0]

    @property
    def nfacets(self):
        return self.facets.shape[0]

    @cached_property
    def cell_measures(self):
        X = self.vertices[self.cells]
        if self.dim == 1:
            return np.abs(X[:, 1, 0] - X[:, 0, 0])
        e1 = X[:, 1] - X[:, 0]
        e2 = X[:, 2] - X[:, 0]
        return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def facet_measures(self):
        # 1D boundary points carry unit (counting) measure
        if self.dim == 1:
            return np.ones(self.nfacets)
        P = self.vertices[self.facets]
        return np.linalg.norm(P[:, 1] - P[:, 0], axis=1)

    @cached_property
    def h(self):
        X = self.vertices[self.cells]
        if self.dim == 1:
            return float(self.cell_measures.max())
        d = [np.linalg.norm(X[:, i] - X[:, j], axis=1) for i, j in ((0, 1), (1, 2), (0, 2))]
        return float(np.max(d))

    @cached_property
    def boundary_vertices(self):
        return np.unique(self.facets)

    def domain_measure(self):
        return float(self.cell_measures.sum())

    def boundary_measure(self):
        return float(self.facet_measures.sum())

    def refine(self):
        """Uniform refinement: segments split in two, triangles in four."""
        if self.dim == 1:
            x = np.sort(self.vertices[:, 0])
            mid = 0.5 * (x[:-1] + x[1:])
            return _interval_from_points(np.sort(np.concatenate([x, mid])))
        return _mesh_from_triangles(*_split_triangles(self.vertices, self.cells))

    # -- plain text I/O -----------------------------------------------------

    def to_text(self):
        lines = []
        for v in self.vertices:
            lines.append("v " + " ".join(repr(float(c)) for c in v))
        for c in self.cells:
            lines.append("c " + " ".join(str(int(i)) for i in c))
        for f in self.facets:
            lines.append("b " + " ".join(str(int(i)) for i in f))
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())


def build_interval_mesh(n):
    """Uniform mesh of (0, 1) with ``n`` cells."""
    if int(n) != n or n < 1:
        raise ValueError(f"interval mesh needs n >= 1 cells, got {n!r}")
    return _interval_from_points(np.linspace(0.0, 1.0, int(n) + 1))


def _interval_from_points(x):
    n = len(x) - 1
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(
        dim=1,
        vertices=_frozen(x[:, None], float),
        cells=_frozen(cells, np.int64),
        facets=_frozen([[0], [n]], np.int64),
        facet_cells=_frozen([0, n - 1], np.int64),
        facet_local=_frozen([1, 0], np.int64),
        normals=_frozen([[-1.0], [1.0]], float),
    )


# -- polygons --------------------------------------------------------------


def polygon_area(vertices):
    """Signed shoelace area (positive for counter-clockwise input)."""
    P = np.asarray(vertices, dtype=float)
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _on_segment(p, a, b, eps):
    return (
        abs(_cross(a, b, p)) <= eps
        and min(a[0], b[0]) - eps <= p[0] <= max(a[0], b[0]) + eps
        and min(a[1], b[1]) - eps <= p[1] <= max(a[1], b[1]) + eps
    )


def _segments_intersect(p1, p2, q1, q2, eps):
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    return (
        _on_segment(p1, q1, q2, eps)
        or _on_segment(p2, q1, q2, eps)
        or _on_segment(q1, p1, p2, eps)
        or _on_segment(q2, p1, p2, eps)
    )


def is_simple_polygon(vertices):
    P = [tuple(map(float, v)) for v in vertices]
    n = len(P)
    if n < 3:
        return False
    scale = max(max(abs(c) for c in p) for p in P) or 1.0
    eps = 1e-12 * scale * scale
    for i in range(n):
        a, b = P[i], P[(i + 1) % n]
        if a == b:
            return False
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_intersect(a, b, P[j], P[(j + 1) % n], eps):
                return False
    return True


def _ear_clip(P):
    """Triangulate a simple counter-clockwise polygon by ear clipping."""
    idx = list(range(len(P)))
    tris = []
    scale = float(np.max(np.abs(P))) or 1.0
    eps = 1e-14 * scale * scale
    guard = 0
    while len(idx) > 3:
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = P[i0], P[i1], P[i2]
            if _cross(a, b, c) <= eps:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = P[j]
                if _cross(a, b, p) >= -eps and _cross(b, c, p) >= -eps and _cross(c, a, p) >= -eps:
                    inside = True
                    break
            if not inside:
                tris.append((i0, i1, i2))
                idx.pop(k)
                break
        else:
            raise ValueError("ear clipping failed: polygon is degenerate")
        guard += 1
        if guard > 10 * len(P):
            raise ValueError("ear clipping did not terminate")
    tris.append(tuple(idx))
    return np.array(tris, dtype=np.int64)


def _split_triangles(V, T):
    edges = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    edges.sort(axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (V[uniq[:, 0]] + V[uniq[:, 1]])
    nv = V.shape[0]
    nt = T.shape[0]
    m01 = nv + inv[:nt]
    m12 = nv + inv[nt:2 * nt]
    m20 = nv + inv[2 * nt:]
    a, b, c = T[:, 0], T[:, 1], T[:, 2]
    newT = np.concatenate([
        np.column_stack([a, m01, m20]),
        np.column_stack([m01, b, m12]),
        np.column_stack([m20, m12, c]),
        np.column_stack([m01, m12, m20]),
    ])
    return np.vstack([V, mids]), newT


def _mesh_from_triangles(V, T):
    V = np.asarray(V, dtype=float)
    T = np.asarray(T, dtype=np.int64).copy()
    X = V[T]
    det = (X[:, 1, 0] - X[:, 0, 0]) * (X[:, 2, 1] - X[:, 0, 1]) - (X[:, 1, 1] - X[:, 0, 1]) * (
        X[:, 2, 0] - X[:, 0, 0]
    )
    if np.any(np.abs(det) == 0.0):
        raise ValueError("degenerate triangle in mesh")
    flip = det < 0
    T[flip] = T[flip][:, [0, 2, 1]]

    # face opposite local vertex l consists of the other two vertices
    faces = np.concatenate([T[:, [1, 2]], T[:, [2, 0]], T[:, [0, 1]]])
    owner = np.tile(np.arange(T.shape[0]), 3)
    local = np.repeat(np.arange(3), T.shape[0])
    key = np.sort(faces, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if np.any(counts > 2):
        raise ValueError("non-manifold mesh: facet shared by more than two cells")
    bmask = counts[inv] == 1
    facets = faces[bmask]
    fcells = owner[bmask]
    flocal = local[bmask]
    P = V[facets]
    t = P[:, 1] - P[:, 0]
    n = np.column_stack([t[:, 1], -t[:, 0]])
    n /= np.linalg.norm(n, axis=1)[:, None]
    # orient away from the adjacent cell centroid
    cen = V[T[fcells]].mean(axis=1)
    mid = P.mean(axis=1)
    s = np.sign(np.einsum("ij,ij->i", n, mid - cen))
    n *= s[:, None]
    return Mesh(
        dim=2,
        vertices=_frozen(V, float),
        cells=_frozen(T, np.int64),
        facets=_frozen(facets, np.int64),
        facet_cells=_frozen(fcells, np.int64),
        facet_local=_frozen(flocal, np.int64),
        normals=_frozen(n, float),
    )


def build_polygon_mesh(vertices, h_target):
    """Triangulate a simple polygon and refine until every cell diameter is
    at most ``h_target``."""
    P = np.asarray(vertices, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2:
        raise ValueError("polygon vertices must be an (n, 2) array")
    if len(P) > 1 and np.allclose(P[0], P[-1]):
        P = P[:-1]
    if len(P) < 3:
        raise ValueError("a polygon needs at least 3 vertices")
    if not h_target > 0:
        raise ValueError("h_target must be positive")
    if not is_simple_polygon(P):
        raise ValueError("polygon is self-intersecting or has repeated vertices")
    if polygon_area(P) < 0:
        P = P[::-1].copy()
    V, T = P, _ear_clip(P)
    mesh = _mesh_from_triangles(V, T)
    while mesh.h > h_target:
        mesh = mesh.refine()
    return mesh


def boundary_measure(mesh):
    return mesh.boundary_measure()


def domain_measure(mesh):
    return mesh.domain_measure()


def unit_square():
    return [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


def l_shape():
    """Unit square with the upper-right quarter removed."""
    return [(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 0.5), (0.5, 1.0), (0.0, 1.0)]


def mesh_from_text(text):
    """Parse the ``v``/``c``/``b`` record format written by :meth:`Mesh.to_text`."""
    verts, cells, bfacets = [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag, rest = parts[0], parts[1:]
        try:
            if tag == "v":
                verts.append([float(p) for p in rest])
            elif tag == "c":
                cells.append([int(p) for p in rest])
            elif tag == "b":
                bfacets.append(tuple(sorted(int(p) for p in rest)))
            else:
                raise ValueError(f"unknown record {tag!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not verts or not cells:
        raise ValueError("mesh text needs vertex and cell records")
    dim = len(verts[0])
    V = np.array(verts, dtype=float)
    if dim == 1:
        order = np.argsort(V[:, 0])
        if not np.allclose(V[order, 0], V[:, 0]):
            raise ValueError("1D meshes must list vertices in increasing order")
        mesh = _interval_from_points(V[:, 0])
    else:
        mesh = _mesh_from_triangles(V, np.array(cells))
    if bfacets:
        got = {tuple(sorted(map(int, f))) for f in mesh.facets}
        if got != set(bfacets):
            raise ValueError("boundary records do not match the cell connectivity")
    return mesh


def load_mesh(path):
    with open(path) as fh:
        return mesh_from_text(fh.read())
