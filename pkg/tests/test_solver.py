import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robinlab.forms import CoefficientSet, assemble, coefficient_preset, poincare_trace_constant
from robinlab.mesh import build_interval_mesh, build_polygon_mesh, unit_square
from robinlab.signals import Signal, boundary_pair
from robinlab.solver import (
    NonFiniteStateError,
    SingularSystemError,
    energy_estimate_check,
    exact_growth_exponent,
    exact_resolvent_1d,
    exact_resolvent_norm_1d,
    mild_residual,
    resolvent_growth_exponent,
    solve_parabolic,
    solve_resolvent,
    solve_resolvent_complex,
    write_summary_csv,
    write_trajectory_csv,
)


@pytest.fixture(scope="module")
def lap200():
    return assemble(build_interval_mesh(200), CoefficientSet())


# -- closed form ---------------------------------------------------------------


def test_exact_values():
    assert exact_resolvent_1d(1.0, 0.0) == pytest.approx(0.850918, abs=1e-6)
    assert exact_resolvent_1d(1.0, 1.0) == pytest.approx(1.313035, abs=1e-6)
    assert exact_resolvent_1d(1.0, 0.0) == pytest.approx(2 / (math.e - 1 / math.e), rel=1e-14)


def test_exact_large_lambda():
    lam = 1e8
    assert lam ** 0.75 * exact_resolvent_norm_1d(lam) == pytest.approx(1 / math.sqrt(2), rel=0.01)
    assert np.all(np.isfinite(exact_resolvent_1d(1e12, np.linspace(0, 1, 5))))


def test_exact_norm_matches_quadrature():
    from scipy.integrate import quad

    for lam in (0.5, 3.0, 40.0):
        val = quad(lambda x: exact_resolvent_1d(lam, x) ** 2, 0, 1, epsabs=1e-14)[0]
        assert exact_resolvent_norm_1d(lam) == pytest.approx(math.sqrt(val), rel=1e-10)


def test_exact_rejects_nonpositive():
    with pytest.raises(ValueError):
        exact_resolvent_1d(0.0, 0.5)
    with pytest.raises(ValueError):
        exact_resolvent_norm_1d(-1.0)


# -- discrete resolvent --------------------------------------------------------


def test_constant_fixed_point(lap200):
    u = solve_resolvent(lap200, 3.0, f=3.0).u
    assert np.max(np.abs(u - 1.0)) < 1e-10


def test_boundary_datum_value(lap200):
    sol = solve_resolvent(lap200, 1.0, 0.0, boundary_pair(0.0, 1.0))
    assert sol.u[0] == pytest.approx(0.85092, abs=1e-4)
    assert sol.residual < 1e-10


def test_second_order_convergence():
    errs = []
    for n in (64, 128, 256):
        s = assemble(build_interval_mesh(n), CoefficientSet())
        u = solve_resolvent(s, 10.0, 0.0, boundary_pair(0.0, 1.0)).u
        ex = exact_resolvent_1d(10.0, s.mesh.vertices[:, 0])
        errs.append(s.l2_norm(u - ex))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_singular_and_omega_gate(lap200):
    with pytest.raises(SingularSystemError):
        solve_resolvent(lap200, 0.0, f=1.0)
    with pytest.raises(ValueError):
        solve_resolvent(lap200, 1.0, f=1.0, omega=2.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 100.0), st.floats(0, 3), st.floats(0, 3))
def test_resolvent_positivity(lam, a, b):
    # lam <= 6/h^2 keeps lam M + K an M-matrix
    s = assemble(build_interval_mesh(40), CoefficientSet())
    u = solve_resolvent(s, lam, f=f"{a}*x*x", g=boundary_pair(b, a)).u
    assert u.min() >= -1e-10


def test_complex_resolvent_real_limit(lap200):
    rhs = lap200.M @ lap200.nodal("cos(pi*x)")
    u = solve_resolvent_complex(lap200, 2.0 + 0j, rhs)
    assert np.allclose(u.imag, 0)
    assert np.allclose(u.real, solve_resolvent(lap200, 2.0, "cos(pi*x)").u)
    w = solve_resolvent_complex(lap200, 2j, rhs, zero_mean=True)
    assert abs(lap200.mass(w.real)) < 1e-12 and abs(lap200.mass(w.imag)) < 1e-12


# -- growth exponent -----------------------------------------------------------


def test_exact_growth():
    fit = exact_growth_exponent(np.geomspace(1e2, 1e6, 9))
    assert fit.slope == pytest.approx(0.25, abs=0.02)
    assert fit.slope_u == pytest.approx(-0.75, abs=0.02)


def test_discrete_growth_and_shift():
    s = assemble(build_interval_mesh(10000), CoefficientSet())
    lams = np.geomspace(1e2, 1e6, 7)
    fit = resolvent_growth_exponent(s, lams)
    assert fit.slope == pytest.approx(0.25, abs=0.04)
    assert fit.warning == ""
    shifted = resolvent_growth_exponent(s, lams * 0.99, shift=1.0)
    assert shifted.slope == pytest.approx(fit.slope, abs=0.01)


def test_growth_underresolved_warning():
    s = assemble(build_interval_mesh(100), CoefficientSet())
    with pytest.warns(RuntimeWarning, match="under-resolved"):
        fit = resolvent_growth_exponent(s, [1e2, 1e4])
    assert fit.warning


# -- time stepping -------------------------------------------------------------


def test_neumann_oracle(lap200):
    traj = solve_parabolic(lap200, "cos(pi*x)", T=0.1, dt=1e-4)
    exact = math.exp(-math.pi ** 2 * 0.1) / math.sqrt(2)
    assert exact == pytest.approx(0.263544, abs=1e-6)
    assert lap200.l2_norm(traj.states[-1]) == pytest.approx(exact, rel=1e-3)


def test_constant_source_exact(lap200):
    traj = solve_parabolic(lap200, 0.0, f=Signal.constant(1.0), T=1.0, dt=0.1)
    assert np.max(np.abs(traj.states - traj.times[:, None])) < 1e-10


def test_trajectory_invariants(lap200):
    traj = solve_parabolic(lap200, "x", T=0.5, dt=0.03)
    assert traj.dt == pytest.approx(0.5 / 17)
    assert traj.times[-1] == pytest.approx(0.5)
    assert traj.states.shape == (len(traj.times), lap200.ndof)
    assert np.all(np.isfinite(traj.states))


def test_parameter_validation(lap200):
    with pytest.raises(ValueError):
        solve_parabolic(lap200, 0.0, T=1.0, dt=-0.1)
    with pytest.raises(ValueError):
        solve_parabolic(lap200, 0.0, T=1.0, dt=2.0)
    with pytest.raises(ValueError):
        solve_parabolic(lap200, 0.0, T=1.0, dt=0.1, theta=0.3)


def test_nonfinite_reported():
    s = assemble(build_interval_mesh(10), coefficient_preset("reaction(-100)"))
    with pytest.raises(NonFiniteStateError) as info:
        with np.errstate(over="ignore", invalid="ignore"):
            solve_parabolic(s, 1e300, T=1.0, dt=0.005)
    assert info.value.step > 0


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 4), st.sampled_from([1.0, 0.5]))
def test_superposition(a, b, eta, theta):
    s = assemble(build_interval_mesh(30), coefficient_preset("drift_balanced(0.3)"))
    f1, g1 = Signal.trig([(eta, "x")]), Signal.constant(boundary_pair(a, 1.0), "boundary")
    f2, g2 = Signal.decaying("cos(pi*x)", 1.0), Signal.trig([(1.0, boundary_pair(1.0, b))], "boundary")
    T, dt = 0.5, 0.01
    t1 = solve_parabolic(s, f"{a}*x", f1, g1, T, dt, theta)
    t2 = solve_parabolic(s, f"{b}*x*x", f2, g2, T, dt, theta)
    t12 = solve_parabolic(s, f"{a}*x + {b}*x*x", f1 + f2, g1 + g2, T, dt, theta)
    assert np.max(np.abs(t12.states - t1.states - t2.states)) < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 2))
def test_positivity(a, b, c):
    # dt >= h^2/6 keeps M + dt K an M-matrix
    s = assemble(build_interval_mesh(40), CoefficientSet())
    u0 = f"{a}*x*x + {c}*(1 - x)"
    traj = solve_parabolic(s, u0, Signal.constant(f"{b}*sin(pi*x)**2"),
                           Signal.square_wave(boundary_pair(a, b), 0.3, "boundary") + Signal.constant(boundary_pair(a, b), "boundary"),
                           T=1.0, dt=0.01)
    assert traj.states.min() >= -1e-10


def test_positivity_2d():
    s = assemble(build_polygon_mesh(unit_square(), 0.25), CoefficientSet())
    traj = solve_parabolic(s, "x*y", Signal.constant(1.0), None, T=0.5, dt=0.05)
    assert traj.states.min() >= -1e-10


def test_conservation_identity():
    s = assemble(build_interval_mesh(60), coefficient_preset("drift_conserving(1.0)"))
    f = Signal.trig([(2.0, "1 + x")])
    g = Signal.constant(boundary_pair(1.0, 0.5), "boundary")
    traj = solve_parabolic(s, "x", f, g, T=1.0, dt=0.01)
    from robinlab.solver import load_vectors

    m = (s.M @ s.ones) @ traj.states.T
    loads = load_vectors(s, f, g, traj.times[:-1] + traj.dt) @ s.ones
    expected = m[0] + np.concatenate([[0.0], np.cumsum(traj.dt * loads)])
    assert np.max(np.abs(m - expected)) < 1e-10


def test_resolvent_is_fixed_point_of_step():
    lam = 2.0
    s = assemble(build_interval_mesh(50), CoefficientSet())
    u = solve_resolvent(s, lam, "x", boundary_pair(1.0, 2.0)).u
    shifted = assemble(s.mesh, CoefficientSet(d=lam))
    step = solve_parabolic(shifted, u, Signal.constant("x"), Signal.constant(boundary_pair(1.0, 2.0), "boundary"),
                           T=0.1, dt=0.1)
    assert np.max(np.abs(step.states[-1] - u)) < 1e-12


# -- mild residual and energy ----------------------------------------------------


def test_mild_residual_zero_data(lap200):
    assert mild_residual(solve_parabolic(lap200, 0.0, T=0.1, dt=0.01)) == 0.0


def test_mild_residual_first_order(lap200):
    r = [mild_residual(solve_parabolic(lap200, "cos(pi*x)", T=0.2, dt=dt)) for dt in (4e-3, 2e-3, 1e-3)]
    ratios = np.array(r[:-1]) / np.array(r[1:])
    assert np.all((ratios > 1.7) & (ratios < 2.3))


def test_energy_zero_data(lap200):
    assert energy_estimate_check(solve_parabolic(lap200, 0.0, T=0.1, dt=0.01)) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("T", [0.05, 0.2])
def test_energy_closed_form(lap200, T):
    expected = 1 + (1 - math.exp(-2 * math.pi ** 2 * T)) / 2
    lhs, rhs, ratio = energy_estimate_check(solve_parabolic(lap200, "cos(pi*x)", T=T, dt=1e-4))
    assert ratio == pytest.approx(expected, rel=0.01)


def test_energy_stable_under_dt(lap200):
    ratios = [energy_estimate_check(solve_parabolic(lap200, "cos(pi*x)", T=0.2, dt=dt))[2]
              for dt in (1e-2, 5e-3, 2.5e-3)]
    assert max(ratios) / min(ratios) < 1.1


# -- decay time ------------------------------------------------------------------


def _decay_holds(mu, tau_fn):
    s = assemble(build_interval_mesh(100), CoefficientSet(a=mu, mu=mu))
    c1 = poincare_trace_constant(s)
    tau = tau_fn(c1, mu)
    traj = solve_parabolic(s, "cos(pi*x)", T=0.5, dt=1e-3)
    e = np.einsum("ti,ti->t", traj.states, (s.M @ traj.states.T).T)
    return bool(np.all(e <= np.exp(-traj.times / tau) * e[0] * (1 + 1e-12)))


@pytest.mark.parametrize("mu", [0.3, 1.0, 10.0])
def test_decay_time_c1_over_mu(mu):
    assert _decay_holds(mu, lambda c1, mu: c1 / mu)


def test_proof_decay_time_fails_for_large_mu():
    # tau = c1 / (2 mu^2) overstates the decay rate once mu > 1/2
    assert not _decay_holds(10.0, lambda c1, mu: c1 / (2 * mu * mu))


# -- export ----------------------------------------------------------------------


def test_csv_export(tmp_path, lap200):
    traj = solve_parabolic(lap200, "x", T=0.02, dt=0.01)
    write_trajectory_csv(traj, tmp_path / "t.csv")
    write_summary_csv(traj, tmp_path / "s.csv")
    head = (tmp_path / "t.csv").read_text().splitlines()[0].split(",")
    assert head[:2] == ["t", "dof_0"] and len(head) == lap200.ndof + 1
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "t,l2_norm,h1_seminorm,mass,min,max"
