"""The numba kernels and their numpy fallbacks must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from robinlab import _kernels
from robinlab.forms import cell_quadrature
from robinlab.mesh import build_interval_mesh, build_polygon_mesh, l_shape


def _inputs(mesh, seed=0):
    _, W, Phi, G = cell_quadrature(mesh, 3)
    nc, nq = W.shape
    dim = mesh.dim
    rng = np.random.default_rng(seed)
    a = np.tile(np.eye(dim), (nc, nq, 1, 1)) + 0.1 * rng.normal(size=(nc, nq, dim, dim))
    b = rng.normal(size=(nc, nq, dim))
    c = rng.normal(size=(nc, nq, dim))
    d = rng.uniform(size=(nc, nq))
    return [np.ascontiguousarray(v, dtype=float) for v in (G, Phi, W, a, b, c, d)]


@pytest.mark.parametrize("mesh", [build_interval_mesh(17), build_polygon_mesh(l_shape(), 0.2)], ids=["1d", "2d"])
def test_local_matrices_agree(mesh):
    args = _inputs(mesh)
    for x, y in zip(_kernels.local_matrices_numpy(*args), _kernels.local_matrices_numba(*args)):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("nv", [2, 3])
def test_superlevel_agree(nv):
    rng = np.random.default_rng(nv)
    vals = rng.normal(size=(500, nv))
    vals[:50] = 0.3  # level exactly at the vertex values
    vals[50:100, 0] = 0.3
    meas = rng.uniform(0.1, 1.0, 500)
    for k in (-5.0, 0.0, 0.3, 5.0):
        for x, y in zip(_kernels.superlevel_cells_numpy(vals, meas, k), _kernels.superlevel_cells_numba(vals, meas, k)):
            assert np.allclose(x, y, rtol=1e-12, atol=1e-15)


def test_superlevel_extremes():
    vals = np.array([[1.0, 2.0, 3.0], [-1.0, -2.0, -3.0]])
    meas = np.array([0.5, 0.5])
    for fn in (_kernels.superlevel_cells_numpy, _kernels.superlevel_cells_numba):
        above, sq = fn(vals, meas, 0.0)
        assert above.tolist() == [0.5, 0.0]
        # integral of v^2 over a simplex of measure m is m (sum v_i^2 + sum_{i<j} v_i v_j) / 6
        assert sq[0] == pytest.approx(0.5 * (14 + 11) / 6)


def test_disable_flag_selects_numpy():
    env = dict(os.environ, ROBINLAB_DISABLE_NUMBA="1")
    code = (
        "from robinlab import _accel; from robinlab.forms import assemble, CoefficientSet;"
        "from robinlab.mesh import build_polygon_mesh, unit_square;"
        "import numpy as np;"
        "s = assemble(build_polygon_mesh(unit_square(), 0.2), CoefficientSet(b=('x','y'), d='1+x'));"
        "print(_accel.HAS_NUMBA, repr(float(abs(s.K).sum())))"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    flag, total = out.stdout.split()
    assert flag == "False"
    from robinlab.forms import CoefficientSet, assemble
    from robinlab.mesh import unit_square

    s = assemble(build_polygon_mesh(unit_square(), 0.2), CoefficientSet(b=("x", "y"), d="1+x"))
    assert float(total) == pytest.approx(float(abs(s.K).sum()), rel=1e-12)
