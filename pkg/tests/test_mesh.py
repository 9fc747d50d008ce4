import numpy as np
import pytest

from robinlab.mesh import (
    build_interval_mesh,
    build_polygon_mesh,
    boundary_measure,
    domain_measure,
    l_shape,
    load_mesh,
    mesh_from_text,
    unit_square,
)


def test_minimal_interval():
    m = build_interval_mesh(1)
    assert m.vertices[:, 0].tolist() == [0.0, 1.0]
    assert m.ncells == 1
    assert m.nfacets == 2


def test_interval_n4():
    m = build_interval_mesh(4)
    assert m.h == 0.25
    assert sorted(m.vertices[m.facets[:, 0], 0].tolist()) == [0.0, 1.0]
    assert m.normals[:, 0].tolist() == [-1.0, 1.0]


def test_interval_lengths_sum():
    m = build_interval_mesh(1000)
    assert abs(m.cell_measures.sum() - 1.0) < 1e-12


def test_interval_rejects_zero():
    with pytest.raises(ValueError):
        build_interval_mesh(0)


def test_interval_measures():
    m = build_interval_mesh(7)
    assert domain_measure(m) == pytest.approx(1.0, abs=1e-14)
    assert boundary_measure(m) == 2.0


def test_refine_halves_h():
    # dyadic vertices make the midpoints exact
    m = build_interval_mesh(8)
    assert m.refine().h == m.h / 2
    assert build_interval_mesh(5).refine().h == pytest.approx(0.1, rel=1e-14)
    sq = build_polygon_mesh(unit_square(), 0.5)
    assert sq.refine().h == pytest.approx(sq.h / 2, rel=1e-14)


def test_square_area_and_perimeter():
    for h in (0.5, 0.2, 0.1):
        m = build_polygon_mesh(unit_square(), h)
        assert abs(m.cell_measures.sum() - 1.0) < 1e-10
        assert abs(m.facet_measures.sum() - 4.0) < 1e-10
        assert m.h <= 2 * h


def test_triangle_minimal():
    m = build_polygon_mesh([(0, 0), (1, 0), (0, 1)], 10.0)
    assert m.ncells == 1
    assert m.domain_measure() == pytest.approx(0.5)


def test_l_shape_area():
    m = build_polygon_mesh(l_shape(), 0.25)
    assert m.domain_measure() == pytest.approx(0.75, abs=1e-12)
    assert m.boundary_measure() == pytest.approx(4.0, abs=1e-12)


def test_polygon_rejects_bad_input():
    with pytest.raises(ValueError):
        build_polygon_mesh([(0, 0), (1, 0)], 0.5)
    with pytest.raises(ValueError):
        build_polygon_mesh([(0, 0), (1, 1), (1, 0), (0, 1)], 0.5)  # bow tie


def test_normals_unit_outward_and_orthogonal():
    m = build_polygon_mesh(l_shape(), 0.2)
    assert np.allclose(np.linalg.norm(m.normals, axis=1), 1.0, atol=1e-12)
    P = m.vertices[m.facets]
    tangent = P[:, 1] - P[:, 0]
    assert np.max(np.abs(np.sum(tangent * m.normals, axis=1))) < 1e-12
    centroids = m.vertices[m.cells[m.facet_cells]].mean(axis=1)
    mid = P.mean(axis=1)
    assert np.all(np.sum((mid - centroids) * m.normals, axis=1) > 0)


def _dist_to_polygon(p, poly):
    poly = np.asarray(poly, dtype=float)
    best = np.inf
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        t = np.clip(np.dot(p - a, b - a) / np.dot(b - a, b - a), 0, 1)
        best = min(best, np.linalg.norm(a + t * (b - a) - p))
    return best


def test_boundary_vertices_on_polygon():
    m = build_polygon_mesh(l_shape(), 0.2)
    for v in m.vertices[m.boundary_vertices]:
        assert _dist_to_polygon(v, l_shape()) < 1e-12


def test_facet_cell_incidence():
    m = build_polygon_mesh(unit_square(), 0.25)
    counts = {}
    for cell in m.cells:
        for i, j in ((0, 1), (1, 2), (0, 2)):
            key = tuple(sorted((cell[i], cell[j])))
            counts[key] = counts.get(key, 0) + 1
    bset = {tuple(sorted(f)) for f in m.facets}
    for key, n in counts.items():
        assert n == (1 if key in bset else 2)
    # boundary facets form closed loops: every boundary vertex has degree two
    deg = np.bincount(m.facets.ravel())
    assert set(deg[deg > 0].tolist()) == {2}


def test_text_roundtrip(tmp_path):
    m = build_polygon_mesh(l_shape(), 0.3)
    path = tmp_path / "m.txt"
    m.save(path)
    m2 = load_mesh(path)
    assert np.array_equal(m2.vertices, m.vertices)
    assert np.array_equal(m2.cells, m.cells)
    m1 = mesh_from_text(build_interval_mesh(3).to_text())
    assert m1.ncells == 3


def test_text_bad_record():
    with pytest.raises(ValueError, match="line 2"):
        mesh_from_text("v 0\nq 1\n")


def test_mesh_immutable():
    m = build_interval_mesh(3)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0
