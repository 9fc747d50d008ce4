"""Seeded families of scenarios and signals used by the property checks."""
from dataclasses import dataclass

import numpy as np

from . import mean_spaces as ms
from .degiorgi import Exponents, sup_bound_check
from .forms import CoefficientSet, assemble
from .mesh import build_interval_mesh
from .norms import lq_norms
from .signals import Signal, boundary_pair
from .solver import solve_parabolic

# -- sup-norm panel ----------------------------------------------------------


@dataclass
class SupPanelMember:
    index: int
    zero_initial: bool
    ratio: float
    global_ratio: float
    sup_norm: float
    rhs: float


def _random_cosines(rng, kmax=5):
    amps = rng.normal(size=kmax + 1) / (1.0 + np.arange(kmax + 1))
    terms = [f"{amps[0]:.6f}"] + [f"{a:.6f}*cos({k}*pi*x)" for k, a in enumerate(amps[1:], 1)]
    return " + ".join(terms)


def random_scenario(rng, zero_initial):
    """Bounded coefficients, an initial datum and forcing drawn from ``rng``."""
    a0 = rng.uniform(1.0, 2.0)
    a1 = rng.uniform(-0.5, 0.5)
    k = int(rng.integers(1, 4))
    coeffs = CoefficientSet(
        a=f"{a0:.6f} + {a1:.6f}*sin({k}*pi*x)",
        c=float(rng.uniform(-0.5, 0.5)),
        d=float(rng.uniform(0.0, 2.0)),
        beta=float(rng.uniform(0.0, 2.0)),
        mu=a0 - abs(a1),
        name="random",
    )
    u0 = 0.0 if zero_initial else _random_cosines(rng)
    f = Signal.trig([(float(rng.uniform(0.5, 6.0)), _random_cosines(rng, 3))]) + Signal.constant(_random_cosines(rng, 2))
    g = Signal.trig(
        [(float(rng.uniform(0.5, 6.0)), boundary_pair(rng.normal(), rng.normal()))], "boundary"
    ) + Signal.decaying(boundary_pair(rng.normal(), rng.normal()), float(rng.uniform(0.5, 3.0)), "boundary")
    return coeffs, u0, f, g


def sup_bound_panel(count=50, seed=0, n=100, T=1.0, dt=0.01, exps=None, zero_fraction=1 / 3):
    """Run ``count`` random scenarios on (0,1) and report the sup-bound ratios.

    Every ``1/zero_fraction``-th member starts from u0 = 0 and also reports the
    ratio with the supremum taken over all of [0, T].
    """
    if exps is None:
        exps = Exponents(4.0, 4.0, 4.0, 2.0, 1)
    rng = np.random.default_rng(seed)
    mesh = build_interval_mesh(n)
    stride = max(1, int(round(1 / zero_fraction)))
    out = []
    for i in range(count):
        zero = i % stride == 0
        coeffs, u0, f, g = random_scenario(rng, zero)
        system = assemble(mesh, coeffs)
        traj = solve_parabolic(system, u0, f, g, T, dt)
        local = sup_bound_check(traj, f, g, exps)
        glob = sup_bound_check(traj, f, g, exps, global_=True).ratio if zero else float("nan")
        out.append(SupPanelMember(i, zero, local.ratio, glob, local.sup_norm, local.rhs))
    return out


def panel_spread(values):
    """(max, median, max/median) of the finite entries."""
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    med = float(np.median(v))
    return float(v.max()), med, float(v.max() / med) if med > 0 else float("inf")


# -- mean-space panel --------------------------------------------------------

FAMILIES = ("constant", "decaying", "periodic", "compact", "mixture")


def random_signal(rng, family, mesh_n=40):
    prof = rng.normal(size=mesh_n + 1)
    if family == "constant":
        return Signal.constant(prof)
    if family == "decaying":
        return Signal.decaying(prof, float(rng.uniform(0.1, 2.0)))
    if family == "periodic":
        return Signal.trig([(float(rng.uniform(0.3, 5.0)), prof, float(rng.uniform(0, 2 * np.pi)))])
    if family == "compact":
        t0 = float(rng.uniform(0.0, 5.0))
        return Signal.compact(prof, t0, t0 + float(rng.uniform(0.2, 4.0)))
    return (
        Signal.decaying(prof, float(rng.uniform(0.1, 2.0)))
        + Signal.trig([(float(rng.uniform(0.3, 5.0)), rng.normal(size=mesh_n + 1))])
        + Signal.compact(rng.normal(size=mesh_n + 1), 1.0, 2.5)
    )


@dataclass
class MeanSpaceMember:
    index: int
    family: str
    window_ratio: float
    window_bound: float
    embedding_lhs: float
    embedding_rhs: float
    bounded_lhs: float
    bounded_rhs: float
    convolution_lhs: float
    convolution_rhs: float

    @property
    def passed(self):
        tol = 1 + 1e-12
        return (
            self.window_ratio <= self.window_bound * tol
            and self.embedding_lhs <= self.embedding_rhs * tol
            and self.bounded_lhs <= self.bounded_rhs * tol
            and self.convolution_lhs <= self.convolution_rhs * tol
        )


def mean_space_panel(count=100, seed=0, horizon=20.0, T=1.0, per_window=50, mesh_n=40):
    """Check the window-equivalence, embedding, bounded-signal and convolution
    inequalities on ``count`` random signals cycling through :data:`FAMILIES`."""
    rng = np.random.default_rng(seed)
    system = assemble(build_interval_mesh(mesh_n), CoefficientSet())
    step = T / per_window
    t = step * np.arange(int(round(horizon / step)) + 1)
    measure = system.mesh.domain_measure()
    out = []
    for i in range(count):
        family = FAMILIES[i % len(FAMILIES)]
        sig = random_signal(rng, family, mesh_n)
        r = float(rng.uniform(1.5, 4.0))
        q = float(rng.uniform(1.5, 4.0))
        r_low = float(rng.uniform(1.0, r))
        q_low = float(rng.uniform(1.0, q))
        T_big = T * float(rng.choice([1.5, 2.0, 3.2]))
        vals = sig.sample(system, t)
        src = f"panel-{seed}-{i}"
        data_q = ms.NormSamples(t, lq_norms(system.mesh, vals, q), q, src)
        data_low = ms.NormSamples(t, lq_norms(system.mesh, vals, q_low), q_low, src + "-low")
        p = ms.running_norm(data_q, r, T)
        wr = ms.window_equivalence_ratio(p, ms.running_norm(data_q, r, T_big))
        emb_lhs = ms.m_norm(ms.running_norm(data_low, r_low, T))
        emb_rhs = ms.embedding_factor(T, r, r_low, q, q_low, measure) * ms.m_norm(p)
        bnd_rhs = T ** (1.0 / r) * float(np.max(data_q.values))
        kernel = ms.exp_kernel(float(rng.uniform(0.2, 3.0))) if i % 2 else ms.box_kernel(float(rng.uniform(0.3, 3.0)))
        conv = ms.convolution_bound_check(p, kernel)
        out.append(MeanSpaceMember(i, family, wr.ratio, wr.bound, emb_lhs, emb_rhs, ms.m_norm(p), bnd_rhs,
                                   float(np.max(conv.lhs)), conv.rhs))
    return out
