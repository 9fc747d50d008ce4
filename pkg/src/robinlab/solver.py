"""Resolvent and time-dependent solves of the Robin parabolic problem."""
import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import cumulative_trapezoid

from .signals import Signal, as_signal, boundary_pair


class SingularSystemError(np.linalg.LinAlgError):
    """The shifted system matrix is (numerically) singular."""


class NonFiniteStateError(FloatingPointError):
    def __init__(self, step):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


def _factorize(A):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sp.SparseEfficiencyWarning)
            return spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from exc


def _nodal_data(system, value):
    if value is None:
        return np.zeros(system.ndof)
    if isinstance(value, Signal):
        return value.nodal(system, 0.0)
    return system.nodal(value)


# -- resolvent ---------------------------------------------------------------


@dataclass
class ResolventSolution:
    lam: complex
    u: np.ndarray
    rhs: tuple
    residual: float


def solve_resolvent(system, lam, f=0.0, g=0.0, omega=None, tol=1e-10):
    """Galerkin solution of lam*u - A u = (f, g).

    Solves (lam M + K) u = M f + Mb g with f, g interpolated at the nodes.
    Pass ``omega`` (e.g. from :func:`estimate_garding`) to enforce lam > omega.
    """
    if omega is not None and not lam > omega:
        raise ValueError(f"lambda={lam} must exceed the Garding shift omega={omega}")
    fn = _nodal_data(system, f)
    gn = _nodal_data(system, g)
    rhs = system.M @ fn + system.Mb @ gn
    A = lam * system.M + system.K
    lu = _factorize(A)
    u = lu.solve(rhs)
    if not np.all(np.isfinite(u)):
        raise SingularSystemError(f"resolvent solve at lambda={lam} produced non-finite values")
    res = np.linalg.norm(A @ u - rhs)
    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    if res > tol * scale * max(1.0, abs(lam)) * 1e3:
        raise SingularSystemError(f"resolvent residual {res:.3e} too large; lambda={lam} is near the spectrum")
    return ResolventSolution(lam, u, (fn, gn), float(res / scale))


def solve_resolvent_complex(system, z, rhs, zero_mean=False):
    """Solve (z M + K) u = rhs for complex z.

    With ``zero_mean`` the solve is restricted to nodal functions of zero
    integral by bordering the matrix with the constraint row.
    """
    A = (z * system.M + system.K).astype(complex)
    rhs = np.asarray(rhs, dtype=complex)
    if zero_mean:
        m = system.M @ system.ones
        A = sp.bmat([[A, sp.csr_matrix(m[:, None])], [sp.csr_matrix(m[None, :]), None]])
        rhs = np.concatenate([rhs, [0.0]])
    u = _factorize(A).solve(rhs)
    if not np.all(np.isfinite(u)):
        raise SingularSystemError(f"complex resolvent at z={z} is singular")
    return u[: system.ndof]


def exact_resolvent_1d(lam, x):
    """Closed-form solution of lam u - u'' = 0 on (0,1), u'(0) = 0, u'(1) = 1.

    Evaluated after multiplying numerator and denominator by exp(-sqrt(lam)).
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    s = np.sqrt(lam)
    x = np.asarray(x, dtype=float)
    return (np.exp(s * (x - 1.0)) + np.exp(-s * (x + 1.0))) / (s * -np.expm1(-2.0 * s))


def exact_resolvent_norm_1d(lam):
    """L^2(0,1) norm of :func:`exact_resolvent_1d`.

    ||u||^2 = (coth(s)/s + 1/sinh(s)^2) / (2 s^2) with s = sqrt(lam).
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    s = np.sqrt(lam)
    if s > 350:
        val = (1.0 / s) / (2.0 * s * s)
    else:
        val = (1.0 / (np.tanh(s) * s) + 1.0 / np.sinh(s) ** 2) / (2.0 * s * s)
    return float(np.sqrt(val))


@dataclass
class GrowthFit:
    slope: float
    slope_u: float
    lambdas: np.ndarray
    norms: np.ndarray
    warning: str = ""


def resolvent_growth_exponent(system, lambdas, shift=0.0):
    """Fit the growth of ||lam R(lam) (0, g)|| for g = (0 at x=0, 1 at x=1).

    ``shift`` replaces A by A - shift.  ``slope`` is the fitted exponent of
    ||lam u||, ``slope_u`` that of ||u||.
    """
    mesh = system.mesh
    if mesh.dim != 1:
        raise ValueError("the boundary datum (0, 1) is defined on the interval only")
    lambdas = np.asarray(lambdas, dtype=float)
    warn = ""
    hs = mesh.h * np.sqrt(lambdas.max() + shift)
    if hs > 0.1 * (1 + 1e-9):
        warn = f"boundary layer under-resolved: h*sqrt(lambda_max) = {hs:.3g} > 0.1"
        warnings.warn(warn, RuntimeWarning, stacklevel=2)
    g = system.nodal(boundary_pair(0.0, 1.0))
    norms = []
    for lam in lambdas:
        u = solve_resolvent(system, lam + shift, 0.0, g).u
        norms.append(system.l2_norm(u))
    norms = np.array(norms)
    loglam = np.log(lambdas)
    slope_u = np.polyfit(loglam, np.log(norms), 1)[0]
    slope = np.polyfit(loglam, np.log(lambdas * norms), 1)[0]
    return GrowthFit(float(slope), float(slope_u), lambdas, norms, warn)


def exact_growth_exponent(lambdas):
    lambdas = np.asarray(lambdas, dtype=float)
    norms = np.array([exact_resolvent_norm_1d(l) for l in lambdas])
    loglam = np.log(lambdas)
    return GrowthFit(
        float(np.polyfit(loglam, np.log(lambdas * norms), 1)[0]),
        float(np.polyfit(loglam, np.log(norms), 1)[0]),
        lambdas,
        norms,
    )


# -- time stepping -----------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    system: object = field(repr=False)
    theta: float = 1.0
    dt: float = 0.0
    f: Signal = None
    g: Signal = None

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("trajectory needs one state per time")

    @property
    def u0(self):
        return self.states[0]

    def scaled(self, factor, f=None, g=None):
        return Trajectory(self.times, self.states * factor, self.system, self.theta, self.dt,
                          f if f is not None else self.f.scale(factor),
                          g if g is not None else self.g.scale(factor))

    def window(self, t_start):
        i = int(np.searchsorted(self.times, t_start - 1e-12 * max(1.0, abs(t_start))))
        return self.times[i:], self.states[i:]

    def summary(self):
        s = self.system
        return {
            "t": self.times,
            "l2_norm": np.sqrt(np.maximum(np.einsum("ti,ti->t", self.states, (s.M @ self.states.T).T), 0)),
            "h1_seminorm": np.sqrt(np.maximum(np.einsum("ti,ti->t", self.states, (s.Kg @ self.states.T).T), 0)),
            "mass": (s.M @ s.ones) @ self.states.T,
            "min": self.states.min(axis=1),
            "max": self.states.max(axis=1),
        }


def load_vectors(system, f, g, times):
    """Rows M f(t) + Mb g(t) for each time."""
    L = np.zeros((len(times), system.ndof))
    if f is not None and not f.is_zero:
        L += (system.M @ f.sample(system, times).T).T
    if g is not None and not g.is_zero:
        L += (system.Mb @ g.sample(system, times).T).T
    return L


def solve_parabolic(system, u0, f=None, g=None, T=1.0, dt=0.01, theta=1.0):
    """theta-scheme for u_t - A u = f, conormal flux + beta u = g.

    (M + theta dt K) u^{n+1} = (M - (1-theta) dt K) u^n + dt (M f + Mb g)(t_n + theta dt).
    The step is adjusted so that a whole number of steps reaches T.
    """
    if not (0 < dt <= T):
        raise ValueError(f"need 0 < dt <= T, got dt={dt}, T={T}")
    if not (0.5 <= theta <= 1.0):
        raise ValueError(f"theta must lie in [1/2, 1], got {theta}")
    f = as_signal(f, "volume")
    g = as_signal(g, "boundary")
    nsteps = max(1, int(round(T / dt)))
    dt = T / nsteps
    times = dt * np.arange(nsteps + 1)
    u = _nodal_data(system, u0).astype(float)
    states = np.empty((nsteps + 1, system.ndof))
    states[0] = u
    lhs = _factorize(system.M + theta * dt * system.K)
    B = (system.M - (1.0 - theta) * dt * system.K).tocsr()
    loads = dt * load_vectors(system, f, g, times[:-1] + theta * dt)
    for n in range(nsteps):
        u = lhs.solve(B @ u + loads[n])
        if not np.all(np.isfinite(u)):
            raise NonFiniteStateError(n + 1)
        states[n + 1] = u
    return Trajectory(times, states, system, theta, dt, f, g)


def mild_residual(traj, system=None, f=None, g=None):
    """Largest dual-norm defect of the time-integrated equation.

    M (u(t) - u0) + K ∫u - ∫(M f + Mb g), integrals by the trapezoid rule on
    the trajectory grid.
    """
    system = system or traj.system
    f = traj.f if f is None else as_signal(f, "volume")
    g = traj.g if g is None else as_signal(g, "boundary")
    U = traj.states
    Qu = cumulative_trapezoid(U, traj.times, axis=0, initial=0)
    QL = cumulative_trapezoid(load_vectors(system, f, g, traj.times), traj.times, axis=0, initial=0)
    R = (system.M @ (U - U[0]).T).T + (system.K @ Qu.T).T - QL
    return max(system.dual_norm(r) for r in R)


def energy_estimate_check(traj, u0=None, f=None, g=None):
    """Both sides of the L^2/H^1 energy bound on the discrete trajectory.

    lhs = max_n ||u^n||^2 + sum_n dt ||grad u^n||^2,
    rhs = ||u0||^2 + sum_n dt (||f^n||^2 + ||g^n||^2_bd); returns (lhs, rhs, lhs/rhs).
    """
    s = traj.system
    f = traj.f if f is None else as_signal(f, "volume")
    g = traj.g if g is None else as_signal(g, "boundary")
    u0 = traj.states[0] if u0 is None else _nodal_data(s, u0)
    U = traj.states
    dts = np.diff(traj.times)
    l2 = np.einsum("ti,ti->t", U, (s.M @ U.T).T)
    grad = np.einsum("ti,ti->t", U[1:], (s.Kg @ U[1:].T).T)
    lhs = float(l2.max() + dts @ grad)
    t = traj.times[1:]
    F = f.sample(s, t)
    G = g.sample(s, t)
    rhs = float(u0 @ (s.M @ u0) + dts @ np.einsum("ti,ti->t", F, (s.M @ F.T).T) + dts @ np.einsum("ti,ti->t", G, (s.Mb @ G.T).T))
    ratio = 0.0 if rhs == 0 else lhs / rhs
    return lhs, rhs, ratio


# -- export ------------------------------------------------------------------


def write_trajectory_csv(traj, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"dof_{i}" for i in range(traj.states.shape[1])])
        for t, u in zip(traj.times, traj.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in u])


def write_summary_csv(traj, path):
    s = traj.summary()
    cols = ["t", "l2_norm", "h1_seminorm", "mass", "min", "max"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*(s[c] for c in cols)):
            w.writerow([repr(float(v)) for v in row])
