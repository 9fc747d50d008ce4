import numpy as np
import pytest

from robinlab.expressions import Expression, ExpressionError, as_field
from robinlab.forms import CoefficientSet, assemble
from robinlab.mesh import build_interval_mesh, build_polygon_mesh, unit_square
from robinlab.norms import lq_norms, mixed_norm, signal_mixed_norm, sup_norms, time_lr
from robinlab.signals import Signal, as_signal, boundary_pair


@pytest.fixture(scope="module")
def system():
    return assemble(build_interval_mesh(50), CoefficientSet())


def test_expression_evaluation():
    x = np.array([[0.0], [0.5], [1.0]])
    assert np.allclose(Expression("cos(pi*x) + t")(x, 2.0), np.cos(np.pi * x[:, 0]) + 2.0)
    assert Expression("sqrt(2)")(x).tolist() == [np.sqrt(2)] * 3
    assert as_field(3.0)(x).tolist() == [3.0] * 3


@pytest.mark.parametrize("src", ["__import__('os')", "x.real", "open(1)", "z + 1", "sin(x, x)", "'a'", "x[0]"])
def test_expression_rejects(src):
    with pytest.raises(ExpressionError):
        Expression(src)


def test_signal_kinds(system):
    t = np.array([0.0, 0.5, 1.0, 2.0])
    assert np.allclose(Signal.constant(2.0).sample(system, t), 2.0)
    assert np.allclose(Signal.trig([(3.0, 1.0)]).sample(system, t)[:, 0], np.cos(3 * t))
    assert np.allclose(Signal.decaying(1.0, 2.0).sample(system, t)[:, 0], np.exp(-2 * t))
    assert Signal.compact(1.0, 0.5, 1.0).sample(system, t)[:, 0].tolist() == [0, 1, 0, 0]
    sq = Signal.square_wave(1.0, 1.0).sample(system, [0.1, 0.6, 1.1])[:, 0]
    assert sq.tolist() == [1, -1, 1]
    assert Signal.zero().is_zero
    assert as_signal(None).is_zero


def test_signal_validation():
    with pytest.raises(ValueError):
        Signal.trig([(1.0, 1.0), (-1.0, 2.0)])
    with pytest.raises(ValueError):
        Signal.decaying(1.0, 0.0)
    with pytest.raises(ValueError):
        Signal.compact(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        Signal.constant(1.0) + Signal.constant(1.0, "boundary")
    with pytest.raises(ValueError):
        Signal.tabulated([0, 0], [[1.0], [2.0]])


def test_signal_sum_scale_frequencies(system):
    s = Signal.trig([(2.0, "x")]) + Signal.constant(1.0)
    assert s.frequencies() == [-2.0, 0.0, 2.0]
    t = np.linspace(0, 1, 5)
    assert np.allclose((3 * s).sample(system, t), 3 * s.sample(system, t))


def test_tabulated_interpolation(system):
    vals = np.vstack([np.zeros(system.ndof), np.ones(system.ndof)])
    s = Signal.tabulated([0.0, 1.0], vals)
    assert np.allclose(s.sample(system, [0.25, 2.0]), [[0.25] * system.ndof, [1.0] * system.ndof])


def test_boundary_pair(system):
    g = Signal.constant(boundary_pair(2.0, -1.0), "boundary")
    v = g.nodal(system, 0.0)
    assert v[0] == 2.0 and v[-1] == -1.0
    assert lq_norms(system.mesh, v, 2, boundary=True)[0] == pytest.approx(np.sqrt(5.0))


def test_lq_norms():
    m = build_interval_mesh(200)
    x = m.vertices[:, 0]
    assert lq_norms(m, np.ones_like(x), 3)[0] == pytest.approx(1.0)
    assert lq_norms(m, x, 2)[0] == pytest.approx(1 / np.sqrt(3), rel=1e-12)
    sq = build_polygon_mesh(unit_square(), 0.2)
    assert lq_norms(sq, np.ones(sq.nvertices), 2, boundary=True)[0] == pytest.approx(2.0)
    assert sup_norms([[1.0, -3.0]])[0] == 3.0
    with pytest.raises(ValueError):
        lq_norms(m, x, 0.5)


def test_time_norms(system):
    t = np.linspace(0, 1, 1001)
    assert time_lr(t, np.ones_like(t), 2) == pytest.approx(1.0)
    assert mixed_norm(system.mesh, t, np.ones((t.size, system.ndof)), 4, 2) == pytest.approx(1.0)
    assert signal_mixed_norm(system, Signal.zero(), t, 2, 2) == 0.0
    assert signal_mixed_norm(system, Signal.constant(2.0), t, 2, 2) == pytest.approx(2.0)
