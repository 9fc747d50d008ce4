"""Cesàro means, frequency sets and the frequency transfer of the parabolic flow."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .forms import check_conservation_condition, check_fixedpoint_condition, decay_time_constant
from .signals import as_signal
from .solver import load_vectors, solve_parabolic, solve_resolvent_complex

POINTS_PER_PERIOD = 20


class UnderResolvedError(ValueError):
    pass


@dataclass
class CesaroCoefficient:
    eta: float
    value: np.ndarray
    trunc_err: float


def _window(times, samples, T_avg):
    times = np.asarray(times, dtype=float)
    samples = np.asarray(samples)
    if T_avg is None:
        T_avg = times[-1] - times[0]
    if not T_avg > 0 or T_avg > times[-1] - times[0] + 1e-9 * max(1.0, T_avg):
        raise ValueError(f"averaging window {T_avg} does not fit the data span {times[-1] - times[0]}")
    start = times[-1] - T_avg
    i = int(np.searchsorted(times, start - 1e-9 * max(1.0, T_avg)))
    return times[i:], samples[i:], float(times[-1] - times[i])


def _sup(samples):
    s = np.asarray(samples)
    return float(np.max(np.abs(s)))


def cesaro_limit(times, samples, eta, T_avg=None, gap=None):
    """(1/T_avg) ∫ e^{-i eta s} f(s) ds over the last ``T_avg`` of the data.

    ``samples`` has shape (nt,) or (nt, n).  The attached truncation estimate
    is 2 sup|f| / (T_avg * gap) with ``gap`` the distance to the nearest other
    frequency (default |eta|, or 1 for eta = 0).
    """
    t, f, span = _window(times, samples, T_avg)
    if eta != 0:
        need = 2 * math.pi / abs(eta) / POINTS_PER_PERIOD
        step = float(np.max(np.diff(t)))
        if step > need * (1 + 1e-9):
            raise UnderResolvedError(
                f"grid step {step:.4g} does not resolve eta={eta} with {POINTS_PER_PERIOD} points per period; use step <= {need:.4g}"
            )
    phase = np.exp(-1j * eta * t)
    weighted = phase[:, None] * f.reshape(len(t), -1)
    value = trapezoid(weighted, t, axis=0) / span
    if np.ndim(samples) == 1:
        value = value[0]
    if gap is None:
        gap = abs(eta) if eta != 0 else 1.0
    return CesaroCoefficient(float(eta), value, 2.0 * _sup(f) / (span * gap))


@dataclass
class FrequencySpectrum:
    T_avg: float
    threshold: float
    noise_floor: float
    coefficients: list = field(default_factory=list)
    norm: object = field(default=None, repr=False)

    @property
    def entries(self):
        return [c for c in self.coefficients if self._norm(c) > self.threshold]

    @property
    def frequencies(self):
        return sorted(c.eta for c in self.entries)

    def _norm(self, c):
        if self.norm is not None:
            return self.norm(c.value)
        return float(np.linalg.norm(np.atleast_1d(c.value)))

    def rows(self):
        out = []
        for c in self.entries:
            v = np.atleast_1d(c.value)
            re = self.norm(v.real) if self.norm else float(np.linalg.norm(v.real))
            im = self.norm(v.imag) if self.norm else float(np.linalg.norm(v.imag))
            out.append((c.eta, re, im, c.trunc_err))
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eta", "re_norm", "im_norm", "trunc_err"])
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])


def _min_gap(etas):
    etas = sorted(set(float(e) for e in etas))
    if len(etas) < 2:
        return abs(etas[0]) if etas and etas[0] != 0 else 1.0
    return float(np.min(np.diff(etas)))


def noise_floor(times, samples, candidate_etas, T_avg=None, norm=None):
    t, f, span = _window(times, samples, T_avg)
    sup = np.max([norm(row) for row in f]) if norm is not None and np.ndim(f) > 1 else _sup(f)
    return 2.0 * float(sup) / (span * _min_gap(candidate_etas))


def freq_set(times, samples, candidate_etas, T_avg=None, threshold=None, norm=None):
    """Candidates whose Cesàro coefficient exceeds ``threshold``.

    The threshold must not lie below the leakage floor
    2 sup|f| / (T_avg * min gap between candidates); by default it is twice that.
    """
    floor = noise_floor(times, samples, candidate_etas, T_avg, norm)
    if threshold is None:
        threshold = 2.0 * floor
    if threshold < floor:
        raise ValueError(f"threshold {threshold:.3g} is below the noise floor {floor:.3g}")
    gap = _min_gap(candidate_etas)
    span = T_avg if T_avg is not None else times[-1] - times[0]
    spec = FrequencySpectrum(float(span), float(threshold), floor, norm=norm)
    for eta in candidate_etas:
        spec.coefficients.append(cesaro_limit(times, samples, float(eta), T_avg, gap))
    return spec


# -- frequency transfer ------------------------------------------------------


@dataclass
class TransferResult:
    eta: float
    lhs: np.ndarray
    rhs: np.ndarray
    deviation: float
    relative: float
    noise_floor: float
    trajectory: object = field(repr=False, default=None)


def forcing_mean_defect(system, f, g, times):
    """max_t |∫f(t) + ∫_bd g(t)| on the given times."""
    L = load_vectors(system, f, g, times)
    return float(np.max(np.abs(L @ system.ones)))


def frequency_transfer_check(system, f, g, eta, u0=None, T_avg=None, dt=None, t_transient=None,
                             theta=1.0, tol=1e-10, trajectory=None):
    """Compare C_eta u of a long run with the resolvent prediction.

    The right side solves (i eta M + K) w = M C_eta f + Mb C_eta g on nodal
    functions of zero mean; for eta = 0 the conserved mean of u0 is added.
    Pass ``trajectory`` to reuse an existing run.
    """
    f = as_signal(f, "volume")
    g = as_signal(g, "boundary")
    cons = check_conservation_condition(system)
    fix = check_fixedpoint_condition(system)
    if cons > tol or fix > tol:
        raise ValueError(f"operator does not conserve mass or fix constants (residuals {cons:.2e}, {fix:.2e})")
    if T_avg is None:
        T_avg = 200 * 2 * math.pi / abs(eta) if eta != 0 else 400 * math.pi
    if trajectory is not None:
        dt = trajectory.dt
    elif dt is None:
        dt = 2 * math.pi / abs(eta) / 100 if eta != 0 else math.pi / 100
    if t_transient is None:
        t_transient = 20.0 * decay_time_constant(system)
    # align the averaging window with the step
    t_transient = dt * math.ceil(t_transient / dt)
    T_avg = dt * round(T_avg / dt)
    if trajectory is None:
        check_times = dt * np.arange(0, 200)
        defect = forcing_mean_defect(system, f, g, check_times)
        scale = max(1.0, float(np.max(np.abs(load_vectors(system, f, g, check_times)))))
        if defect > 1e-9 * scale:
            raise ValueError(f"forcing violates the zero-mean compatibility (defect {defect:.3e})")
        trajectory = solve_parabolic(system, u0 if u0 is not None else 0.0, f, g, t_transient + T_avg, dt, theta)
    times = trajectory.times
    lhs = cesaro_limit(times, trajectory.states, eta, T_avg).value
    Cf = cesaro_limit(times, f.sample(system, times), eta, T_avg).value if not f.is_zero else 0.0
    Cg = cesaro_limit(times, g.sample(system, times), eta, T_avg).value if not g.is_zero else 0.0
    rhs_vec = system.M @ (np.zeros(system.ndof) + Cf) + system.Mb @ (np.zeros(system.ndof) + Cg)
    rhs = solve_resolvent_complex(system, 1j * eta, rhs_vec, zero_mean=True)
    if eta == 0:
        u_init = trajectory.states[0]
        rhs = rhs + system.mass(u_init) / system.mesh.domain_measure()
    dev = system.l2_norm(lhs - rhs)
    ref = system.l2_norm(rhs)
    floor = noise_floor(times, trajectory.states, [eta] if eta != 0 else [1.0], T_avg,
                        norm=system.l2_norm)
    return TransferResult(float(eta), lhs, rhs, dev, dev / ref if ref > 0 else math.inf, floor, trajectory)


# -- asymptotic periodicity --------------------------------------------------


@dataclass
class PeriodicityProfile:
    tau: float
    times: np.ndarray
    d_l2: np.ndarray
    d_max: np.ndarray
    envelope: np.ndarray
    envelope_max: np.ndarray

    def value_at(self, t, which="l2"):
        env = self.envelope if which == "l2" else self.envelope_max
        i = min(int(np.searchsorted(self.times, t - 1e-9 * max(1.0, t))), len(self.times) - 1)
        return float(env[i])


def asymptotic_periodicity_check(traj, tau, min_periods=10):
    """d(t) = ||u(t + tau) - u(t)|| in L^2 and in the nodal max norm.

    The envelopes are the running maxima from the right, i.e. the smallest
    nonincreasing functions above each profile.
    """
    horizon = traj.times[-1] - traj.times[0]
    if horizon < min_periods * tau * (1 - 1e-9):
        raise ValueError(f"horizon {horizon} shorter than {min_periods} periods of {tau}")
    steps = tau / traj.dt
    p = int(round(steps))
    if p < 1 or abs(steps - p) > 1e-6 * steps:
        raise ValueError(f"period {tau} is not a whole number of steps of {traj.dt}")
    D = traj.states[p:] - traj.states[:-p]
    M = traj.system.M
    d_l2 = np.sqrt(np.maximum(np.einsum("ti,ti->t", D, (M @ D.T).T), 0.0))
    d_max = np.max(np.abs(D), axis=1)
    env = np.maximum.accumulate(d_l2[::-1])[::-1]
    env_max = np.maximum.accumulate(d_max[::-1])[::-1]
    return PeriodicityProfile(float(tau), traj.times[:-p], d_l2, d_max, env, env_max)
