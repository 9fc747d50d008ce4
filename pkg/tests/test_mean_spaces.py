import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robinlab import mean_spaces as ms
from robinlab.forms import CoefficientSet, assemble
from robinlab.mesh import build_interval_mesh
from robinlab.signals import Signal

STEP = 0.01


def prof(fn, horizon=30.0, q=2.0, source="s"):
    return ms.sample_profile(fn, horizon, STEP, q, source)


def test_constant_window():
    p = ms.running_norm(prof(lambda t: 3.0), r=2, T=1.0)
    ok = ~p.truncated
    assert np.allclose(p.samples[ok], 3.0, rtol=1e-12)
    assert ms.m_norm(p) == pytest.approx(3.0)
    assert not ms.is_m0(p, 1e-6, 20.0)


def test_compact_window_vanishes():
    p = ms.running_norm(prof(lambda t: (t <= 1.0).astype(float)), r=2, T=1.0)
    assert np.all(p.samples[p.times > 1.0 + STEP / 2] == 0.0)


def test_exponential_window_closed_form():
    p = ms.running_norm(prof(lambda t: np.exp(-t)), r=2, T=1.0)
    ok = ~p.truncated
    exact = np.exp(-p.times[ok]) * math.sqrt((1 - math.exp(-2)) / 2)
    assert np.allclose(p.samples[ok], exact, rtol=1e-4, atol=1e-7)
    assert p.samples[0] == pytest.approx(0.65753, abs=1e-5)
    assert np.all(np.diff(p.samples) <= 0)
    assert ms.is_m0(p, 1e-6, 20.0)


def test_periodic_not_m0():
    p = ms.running_norm(prof(lambda t: np.abs(np.sin(t))), r=2, T=1.0)
    assert ms.m_norm(p) > 0
    assert not ms.is_m0(p, 1e-6, 20.0)


def test_truncation_flag_and_errors():
    p = ms.running_norm(prof(lambda t: 1.0, horizon=5.0), r=2, T=1.0)
    assert p.truncated[-1] and not p.truncated[0]
    with pytest.raises(ValueError):
        ms.running_norm(ms.sample_profile(lambda t: 1.0, 5.0, 0.2), r=2, T=1.0)
    with pytest.raises(ValueError):
        ms.running_norm(prof(lambda t: 1.0), r=0.5, T=1.0)
    with pytest.raises(ValueError):
        ms.NormSamples([0, 1], [1, -1])
    with pytest.raises(ValueError):
        ms.is_m0(p, 1e-3, 100.0)


def test_window_equivalence_examples():
    data = prof(lambda t: 2.0)
    w = ms.window_equivalence_ratio(ms.running_norm(data, 2, 1.0), ms.running_norm(data, 2, 2.0))
    assert w.ratio == pytest.approx(math.sqrt(2)) and w.bound == 2 and w.holds
    same = ms.window_equivalence_ratio(ms.running_norm(data, 2, 1.0), ms.running_norm(data, 2, 1.0))
    assert same.ratio == 1.0
    e = prof(lambda t: np.exp(-t))
    w3 = ms.window_equivalence_ratio(ms.running_norm(e, 2, 1.0), ms.running_norm(e, 2, 3.0))
    assert w3.bound == 3 and w3.holds


def test_window_equivalence_rejects_mismatch():
    a = ms.running_norm(prof(lambda t: 1.0, source="a"), 2, 1.0)
    b = ms.running_norm(prof(lambda t: 1.0 + 0 * t, source="b"), 2, 2.0)
    with pytest.raises(ValueError):
        ms.window_equivalence_ratio(a, b)
    with pytest.raises(ValueError):
        ms.window_equivalence_ratio(a, ms.running_norm(a.data, 3, 2.0))


def test_convolution_exp_constant():
    p = ms.running_norm(prof(lambda t: 1.0, horizon=10.0), r=2, T=1.0)
    c = ms.convolution_bound_check(p, ms.exp_kernel(1.0))
    assert np.allclose(c.lhs, 1 - np.exp(-c.times), atol=1e-4)
    assert c.rhs == pytest.approx(3.0) and c.holds


def test_convolution_zero_and_box():
    z = ms.running_norm(prof(lambda t: 0.0, horizon=5.0), r=2, T=1.0)
    assert np.all(ms.convolution_bound_check(z, ms.exp_kernel()).lhs == 0)
    p = ms.running_norm(prof(lambda t: (t <= 1.0).astype(float), horizon=5.0), r=2, T=1.0)
    c = ms.convolution_bound_check(p, ms.box_kernel(1.0))
    t = c.times
    overlap = np.clip(np.minimum(t, 1.0) - np.maximum(t - 1.0, 0.0), 0, None)
    assert np.allclose(c.lhs, overlap, atol=2 * STEP)
    assert c.holds and c.rhs <= 3.0 + 1e-12


def test_kernel_monotone_required():
    p = ms.running_norm(prof(lambda t: 1.0, horizon=5.0), r=2, T=1.0)
    bad = ms.Kernel(lambda s: np.sin(s) ** 2, 1.0, 1.0)
    with pytest.raises(ValueError):
        ms.convolution_bound_check(p, bad)


def test_convolution_decay():
    p = ms.running_norm(prof(lambda t: np.exp(-t / 2)), r=2, T=1.0)
    d = ms.convolution_decay_check(p, ms.exp_kernel(1.0), tol=1e-6, t_tail=25.0, profile_tol=1e-4)
    assert d.applicable and d.decays
    assert np.allclose(d.lhs, p.data.times * np.exp(-p.data.times), atol=1e-4)
    c = ms.running_norm(prof(lambda t: (t <= 2.0).astype(float)), r=2, T=1.0)
    assert ms.convolution_decay_check(c, ms.exp_kernel(1.0), tol=1e-6, t_tail=25.0).decays
    k = ms.running_norm(prof(lambda t: 1.0), r=2, T=1.0)
    res = ms.convolution_decay_check(k, ms.exp_kernel(1.0), tol=1e-6, t_tail=25.0)
    assert not res.applicable and not res.decays
    assert res.tail_max == pytest.approx(1.0, abs=1e-3)


def test_continuity_under_refinement():
    fn = lambda t: 1 + np.sin(3 * t)  # noqa: E731
    devs = []
    for step in (0.02, 0.01, 0.005):
        p = ms.running_norm(ms.sample_profile(fn, 10.0, step), 2, 1.0)
        devs.append(np.max(np.abs(np.diff(p.samples))))
    assert devs[0] > devs[1] > devs[2]


def test_triangle_inequality_of_m_norm():
    system = assemble(build_interval_mesh(30), CoefficientSet())
    f = Signal.trig([(2.0, "x")])
    g = Signal.decaying("cos(pi*x)", 0.5)
    norms = []
    for s in (f, g, f + g):
        norms.append(ms.m_norm(ms.running_norm(ms.signal_profile(system, s, 3.0, 20.0, 0.02), 2.5, 1.0)))
    assert norms[2] <= norms[0] + norms[1] + 1e-12


def test_closed_subspace_sequence():
    limit = ms.running_norm(prof(lambda t: np.exp(-t)), 2, 1.0)
    for n in (1, 10, 100):
        pn = ms.running_norm(prof(lambda t, n=n: np.exp(-t) * (1 + 1.0 / n)), 2, 1.0)
        assert ms.is_m0(pn, 1e-6, 20.0)
    assert ms.is_m0(limit, 1e-6, 20.0)


def test_profile_csv(tmp_path):
    p = ms.running_norm(prof(lambda t: 1.0, horizon=2.0), 2, 1.0)
    p.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "t,R" and len(lines) == len(p.times) + 1


@settings(max_examples=40, deadline=None)
@given(
    st.floats(1.0, 4.0), st.floats(1.0, 4.0), st.floats(1.0, 4.0), st.floats(1.0, 4.0),
    st.floats(0.1, 3.0), st.sampled_from([1.5, 2.0, 2.7, 3.0]),
)
def test_embeddings_hold(r, r_low_frac, q, q_low_frac, rate, factor):
    system = assemble(build_interval_mesh(20), CoefficientSet())
    sig = Signal.decaying("1 + x", rate) + Signal.trig([(1.3, "cos(pi*x)")])
    r_low = 1 + (r - 1) * (r_low_frac - 1) / 3
    q_low = 1 + (q - 1) * (q_low_frac - 1) / 3
    hi = ms.signal_profile(system, sig, q, 15.0, 0.02, source="x")
    lo = ms.signal_profile(system, sig, q_low, 15.0, 0.02, source="x")
    p = ms.running_norm(hi, r, 1.0)
    emb = ms.embedding_factor(1.0, r, r_low, q, q_low, 1.0) * ms.m_norm(p)
    assert ms.m_norm(ms.running_norm(lo, r_low, 1.0)) <= emb * (1 + 1e-12)
    assert ms.m_norm(p) <= 1.0 ** (1 / r) * np.max(hi.values) * (1 + 1e-12)
    assert ms.window_equivalence_ratio(p, ms.running_norm(hi, r, factor)).holds
