"""Named verification checks run by scenarios.

Each check receives a :class:`robinlab.scenario.Context` and a
:class:`robinlab.scenario.CheckSpec` and returns a :class:`CheckResult`.
Failures are reported through ``passed``; only configuration problems raise.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import almost_periodic as ap
from . import degiorgi as dg
from . import forms, panels, solver
from .expressions import Expression
from .mesh import build_interval_mesh
from .signals import Signal


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tol: float
    details: dict = field(default_factory=dict)
    table: tuple = None  # (header, rows) written as CSV when present

    def summary(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: measured={self.measured:.6g} tol={self.tol:.3g}"


CHECKS = {}


def register(name, description):
    def deco(fn):
        fn.description = description
        CHECKS[name] = fn
        return fn

    return deco


def number(value):
    """Read a number that may be given as an expression such as ``pi**2``."""
    if isinstance(value, str):
        return float(Expression(value)(np.zeros((1, 1)))[0])
    return float(value)


def _param(spec, key, default=None):
    v = spec.params.get(key, default)
    if v is None:
        raise KeyError(f"check {spec.name!r} needs parameter {key!r}")
    return v


def _require_interval(ctx, what):
    if ctx.mesh.dim != 1:
        raise ValueError(f"{what} is defined on the interval only")


# -- resolvent ---------------------------------------------------------------


@register("resolvent_exact", "relative L2 error of the 1D resolvent against the closed form, plus observed order")
def check_resolvent_exact(ctx, spec):
    _require_interval(ctx, "resolvent_exact")
    lambdas = [number(v) for v in spec.params.get("lambdas", [1, 10, 100])]
    min_order = number(spec.params.get("min_order", 1.9))
    n = ctx.mesh.ncells
    g = ctx.boundary_pair(0.0, 1.0)
    rows = []
    errs, orders = [], []
    for lam in lambdas:
        e = []
        for cells in (n, n // 2):
            mesh = ctx.mesh if cells == n else build_interval_mesh(cells)
            system = ctx.system if cells == n else forms.assemble(mesh, ctx.coeffs)
            u = solver.solve_resolvent(system, lam, 0.0, g).u
            ex = solver.exact_resolvent_1d(lam, mesh.vertices[:, 0])
            e.append(system.l2_norm(u - ex) / system.l2_norm(ex))
        order = math.log2(e[1] / e[0])
        errs.append(e[0])
        orders.append(order)
        rows.append((lam, e[0], e[1], order))
    worst = max(errs)
    passed = worst <= spec.tol and min(orders) >= min_order
    return CheckResult(spec.name, passed, worst, spec.tol, {"min_order": min(orders)},
                       (["lambda", "rel_err", "rel_err_coarse", "order"], rows))


@register("growth_exponent", "fitted exponent of ||lambda R(lambda)(0,g)|| against the 1/4 law")
def check_growth_exponent(ctx, spec):
    lo = number(spec.params.get("lambda_min", 1e2))
    hi = number(spec.params.get("lambda_max", 1e6))
    count = int(spec.params.get("count", 9))
    target = number(spec.params.get("target", 0.25))
    method = spec.params.get("method", "exact")
    lambdas = np.geomspace(lo, hi, count)
    if method == "exact":
        fit = solver.exact_growth_exponent(lambdas)
    elif method == "discrete":
        _require_interval(ctx, "growth_exponent")
        fit = solver.resolvent_growth_exponent(ctx.system, lambdas, number(spec.params.get("shift", 0.0)))
    else:
        raise ValueError(f"unknown growth_exponent method {method!r}")
    dev = abs(fit.slope - target)
    rows = [(l, n, l * n) for l, n in zip(fit.lambdas, fit.norms)]
    return CheckResult(spec.name, dev <= spec.tol, fit.slope, spec.tol,
                       {"slope_u": fit.slope_u, "deviation": dev, "warning": fit.warning},
                       (["lambda", "u_norm", "lambda_u_norm"], rows))


# -- structure ---------------------------------------------------------------


@register("conservation_condition", "normalised form residual against the constant function")
def check_conservation_condition(ctx, spec):
    r = forms.check_conservation_condition(ctx.system)
    return CheckResult(spec.name, r <= spec.tol, r, spec.tol)


@register("fixedpoint_condition", "dual norm of K applied to the constant function")
def check_fixedpoint_condition(ctx, spec):
    r = forms.check_fixedpoint_condition(ctx.system)
    return CheckResult(spec.name, r <= spec.tol, r, spec.tol)


@register("ellipticity", "min of xi.a.xi - mu|xi|^2 over quadrature points and directions (must be >= -tol)")
def check_ellipticity(ctx, spec):
    r = forms.check_ellipticity(ctx.coeffs, ctx.mesh)
    return CheckResult(spec.name, r >= -spec.tol, r, spec.tol)


# -- trajectory checks ---------------------------------------------------------


@register("mass_identity", "total mass equals initial mass plus time-integrated sources at every step")
def check_mass_identity(ctx, spec):
    traj = ctx.trajectory
    s = ctx.system
    masses = (s.M @ s.ones) @ traj.states.T
    loads = solver.load_vectors(s, traj.f, traj.g, traj.times[:-1] + traj.theta * traj.dt) @ s.ones
    expected = masses[0] + np.concatenate([[0.0], np.cumsum(traj.dt * loads)])
    dev = float(np.max(np.abs(masses - expected)))
    rows = list(zip(traj.times, masses, expected))
    return CheckResult(spec.name, dev <= spec.tol, dev, spec.tol, {"steps": len(traj.times) - 1},
                       (["t", "mass", "expected"], rows))


@register("l2_oracle", "||u(t)|| against amplitude*exp(-rate t) at listed times (relative)")
def check_l2_oracle(ctx, spec):
    traj = ctx.trajectory
    amp = number(_param(spec, "amplitude"))
    rate = number(_param(spec, "rate"))
    times = [number(t) for t in _param(spec, "times")]
    rows = []
    worst = 0.0
    for t in times:
        i = int(round(t / traj.dt))
        if abs(traj.times[i] - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"time {t} is not on the step grid")
        got = ctx.system.l2_norm(traj.states[i])
        want = amp * math.exp(-rate * t)
        rel = abs(got - want) / want
        worst = max(worst, rel)
        rows.append((t, got, want, rel))
    return CheckResult(spec.name, worst <= spec.tol, worst, spec.tol, {}, (["t", "l2_norm", "oracle", "rel_dev"], rows))


@register("decay_bound", "||u(t) - mean||^2 <= exp(-t/tau) ||u0 - mean||^2 at every step (unforced runs)")
def check_decay_bound(ctx, spec):
    traj = ctx.trajectory
    s = ctx.system
    if not (traj.f.is_zero and traj.g.is_zero):
        raise ValueError("decay_bound applies to unforced runs")
    tau = forms.decay_time_constant(s)
    mean = s.mass(traj.states[0]) / ctx.mesh.domain_measure()
    D = traj.states - mean
    e = np.einsum("ti,ti->t", D, (s.M @ D.T).T)
    bound = np.exp(-traj.times / tau) * e[0]
    excess = float(np.max((e - bound) / max(e[0], 1e-300)))
    rows = list(zip(traj.times, e, bound))
    return CheckResult(spec.name, excess <= spec.tol, excess, spec.tol, {"tau": tau},
                       (["t", "energy", "bound"], rows))


@register("mean_convergence", "L2 and nodal max deviation from the initial mean at a given time")
def check_mean_convergence(ctx, spec):
    traj = ctx.trajectory
    s = ctx.system
    t = number(_param(spec, "time"))
    tol_max = number(spec.params.get("tol_max", 10 * spec.tol))
    i = int(round(t / traj.dt))
    mean = s.mass(traj.states[0]) / ctx.mesh.domain_measure()
    dev = traj.states[i] - mean
    l2 = s.l2_norm(dev)
    mx = float(np.max(np.abs(dev)))
    return CheckResult(spec.name, l2 <= spec.tol and mx <= tol_max, l2, spec.tol, {"max_dev": mx, "tol_max": tol_max})


@register("energy_estimate", "ratio of the energy estimate sides must stay below a bound")
def check_energy_estimate(ctx, spec):
    lhs, rhs, ratio = solver.energy_estimate_check(ctx.trajectory)
    return CheckResult(spec.name, ratio <= spec.tol, ratio, spec.tol, {"lhs": lhs, "rhs": rhs})


@register("mild_residual", "dual-norm defect of the time-integrated equation")
def check_mild_residual(ctx, spec):
    r = solver.mild_residual(ctx.trajectory)
    return CheckResult(spec.name, r <= spec.tol, r, spec.tol)


@register("positivity", "min nodal value over the trajectory must be >= -tol")
def check_positivity(ctx, spec):
    m = float(np.min(ctx.trajectory.states))
    return CheckResult(spec.name, m >= -spec.tol, m, spec.tol)


@register("periodicity", "||u(t+tau) - u(t)|| envelope below tol by a given time")
def check_periodicity(ctx, spec):
    tau = number(_param(spec, "period"))
    t = number(spec.params.get("time", 10 * tau))
    prof = ap.asymptotic_periodicity_check(ctx.trajectory, tau)
    val = prof.value_at(t)
    mx = prof.value_at(t, "max")
    rows = list(zip(prof.times, prof.d_l2, prof.d_max))
    return CheckResult(spec.name, val <= spec.tol, val, spec.tol, {"max_norm": mx},
                       (["t", "d_l2", "d_max"], rows))


# -- frequency transfer ------------------------------------------------------


def _transfer(ctx, spec):
    """Long run driven by the scenario forcing, shared by the frequency checks.

    ``eta`` selects the forcing frequency; ``T_avg``, ``dt`` and
    ``t_transient`` override the defaults of the transfer check.
    """
    eta = number(_param(spec, "eta"))
    kw = {k: number(spec.params[k]) for k in ("T_avg", "dt", "t_transient") if k in spec.params}
    key = ("transfer", eta, tuple(sorted(kw.items())))
    if key not in ctx.cache:
        res = ap.frequency_transfer_check(ctx.system, ctx.f, ctx.g, eta, u0=ctx.u0, **kw)
        T_avg = res.trajectory.dt * round(kw.get("T_avg", 200 * 2 * math.pi / eta) / res.trajectory.dt)
        ctx.cache[key] = (res, T_avg)
    return ctx.cache[key]


def _probe(ctx, spec, eta):
    base, T_avg = _transfer(ctx, spec)
    return ap.frequency_transfer_check(ctx.system, ctx.f, ctx.g, eta, T_avg=T_avg, trajectory=base.trajectory)


@register("frequency_transfer", "Cesaro coefficient of u against the complex resolvent prediction (relative L2)")
def check_frequency_transfer(ctx, spec):
    res, T_avg = _transfer(ctx, spec)
    return CheckResult(spec.name, res.relative <= spec.tol, res.relative, spec.tol,
                       {"deviation": res.deviation, "noise_floor": res.noise_floor, "T_avg": T_avg})


@register("absent_frequency", "Cesaro coefficients at frequencies absent from the forcing stay below the noise floor")
def check_absent_frequency(ctx, spec):
    rows = []
    for probe in spec.params.get("probes", [3.0]):
        res = _probe(ctx, spec, number(probe))
        rows.append((res.eta, ctx.system.l2_norm(res.lhs), ctx.system.l2_norm(res.rhs), res.noise_floor))
    excess = max(max(r[1], r[2]) / r[3] for r in rows)
    return CheckResult(spec.name, excess <= spec.tol, excess, spec.tol, {},
                       (["eta", "lhs_norm", "rhs_norm", "noise_floor"], rows))


@register("zero_frequency", "C_0 u equals the conserved mean of u0, and 0 is in Freq(u) iff the initial mass is nonzero")
def check_zero_frequency(ctx, spec):
    res = _probe(ctx, spec, 0.0)
    lhs = ctx.system.l2_norm(res.lhs)
    present = lhs > res.noise_floor
    # the mean enters C_0 u as a constant of L^2 norm |mean| |Omega|^(1/2)
    measure = ctx.mesh.domain_measure()
    mean_norm = abs(ctx.system.mass(res.trajectory.states[0])) / math.sqrt(measure)
    expect = mean_norm > res.noise_floor
    passed = res.deviation <= spec.tol and present == expect
    return CheckResult(spec.name, passed, res.deviation, spec.tol,
                       {"lhs_norm": lhs, "noise_floor": res.noise_floor, "present": present, "mean_norm": mean_norm})


# -- De Giorgi ---------------------------------------------------------------


@register("iteration_lemma", "saturated recurrence stays below the geometric envelope on a random parameter grid")
def check_iteration_lemma(ctx, spec):
    count = int(spec.params.get("count", 10000))
    n_max = int(spec.params.get("n_max", 60))
    results = dg.verify_parameter_grid(dg.random_parameter_grid(count, ctx.seed), n_max=n_max)
    worst = min(r.min_margin for r in results)
    passed = all(r.holds for r in results)
    rows = [(r.params.c, r.params.b, r.params.eps, r.params.delta, r.params.lam, r.min_margin, n_max) for r in results]
    return CheckResult(spec.name, passed, worst, spec.tol, {"count": count, "slack": results[0].slack},
                       (["c", "b", "eps", "delta", "lambda", "min_margin", "n_max"], rows))


@register("sup_bound_panel", "sup-norm ratio uniformly bounded over a seeded random panel (max <= factor * median)")
def check_sup_bound_panel(ctx, spec):
    count = int(spec.params.get("count", 50))
    members = panels.sup_bound_panel(count, ctx.seed)
    mx, med, spread = panels.panel_spread([m.ratio for m in members])
    gmx, gmed, gspread = panels.panel_spread([m.global_ratio for m in members])
    passed = spread <= spec.tol and gspread <= spec.tol
    rows = [(m.index, int(m.zero_initial), m.ratio, m.global_ratio) for m in members]
    return CheckResult(spec.name, passed, max(spread, gspread), spec.tol,
                       {"max": mx, "median": med, "global_max": gmx, "global_median": gmed, "seed": ctx.seed},
                       (["index", "zero_initial", "ratio", "global_ratio"], rows))


@register("mean_space_inequalities", "window equivalence, embedding, bounded-signal and convolution bounds on random signals")
def check_mean_space_inequalities(ctx, spec):
    count = int(spec.params.get("count", 100))
    members = panels.mean_space_panel(count, ctx.seed)
    failures = [m.index for m in members if not m.passed]
    rows = [(m.index, m.family, m.window_ratio, m.window_bound, m.embedding_lhs, m.embedding_rhs,
             m.bounded_lhs, m.bounded_rhs, m.convolution_lhs, m.convolution_rhs) for m in members]
    header = ["index", "family", "window_ratio", "window_bound", "embedding_lhs", "embedding_rhs",
              "bounded_lhs", "bounded_rhs", "convolution_lhs", "convolution_rhs"]
    return CheckResult(spec.name, not failures, float(len(failures)), spec.tol, {"failures": failures},
                       (header, rows))


@register("caccioppoli", "gamma required by the truncated energy inequality stays bounded over a k panel")
def check_caccioppoli(ctx, spec):
    exps = dg.Exponents(*[number(v) for v in spec.params.get("exponents", [4, 4, 4, 2])], ctx.mesh.dim)
    tau = number(spec.params.get("tau", ctx.trajectory.times[-1] / 2))
    sigma = number(spec.params.get("sigma", 0.25))
    k_hat = dg.forcing_level(ctx.trajectory, ctx.f, ctx.g, exps)
    base = max(k_hat, number(spec.params.get("k_min", 0.0)))
    rows = []
    for factor in spec.params.get("k_factors", [1, 2, 4]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # levels below min u are legitimate panel members
            r = dg.caccioppoli_check(ctx.trajectory, ctx.f, ctx.g, base * number(factor), tau, sigma, exps)
        rows.append((base * number(factor), r.lhs, r.gamma_required))
    worst = max(r[2] for r in rows)
    return CheckResult(spec.name, worst <= spec.tol, worst, spec.tol, {"k_hat": k_hat},
                       (["k", "lhs", "gamma_required"], rows))


def describe():
    return [(name, fn.description) for name, fn in sorted(CHECKS.items())]


__all__ = ["CHECKS", "CheckResult", "describe", "register", "Signal"]
