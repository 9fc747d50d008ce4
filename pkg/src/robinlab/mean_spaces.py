"""Running window norms R_{f,T}(t) and the uniformly mean integrable spaces.

A signal enters only through its scalar spatial norm profile t -> ||f(t)||_{L^q},
sampled on a grid.  All time integrals are composite trapezoid sums; window
integrals are differences of the cumulative sum, linearly interpolated
between grid points.  Positive weights make the Hölder-type inequalities of
this module hold exactly on the discrete data, so tests compare them without
slack beyond rounding.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .norms import lq_norms


@dataclass(frozen=True)
class NormSamples:
    """Scalar profile ||f(t)||_{L^q} on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    q: float = 2.0
    source: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValueError("norm samples need matching 1D time and value arrays with at least two points")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("norm samples must be finite and nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def horizon(self):
        return float(self.times[-1])

    @property
    def step(self):
        return float(np.max(np.diff(self.times)))


def sample_profile(fn, horizon, step, q=2.0, source=""):
    """Evaluate a scalar profile ``fn(t)`` on the uniform grid 0, step, ..., horizon."""
    n = int(round(horizon / step))
    t = step * np.arange(n + 1)
    return NormSamples(t, np.asarray(fn(t), dtype=float) * np.ones_like(t), q, source)


def signal_profile(system, signal, q, horizon, step, boundary=None, source=None):
    """Spatial L^q norms of a :class:`Signal` on a uniform time grid."""
    n = int(round(horizon / step))
    t = step * np.arange(n + 1)
    if boundary is None:
        boundary = signal.target == "boundary"
    vals = lq_norms(system.mesh, signal.sample(system, t), q, boundary)
    return NormSamples(t, vals, q, source if source is not None else repr(signal))


@dataclass
class RunningNormProfile:
    r: float
    q: float
    T: float
    times: np.ndarray
    samples: np.ndarray
    truncated: np.ndarray
    source: str
    data: NormSamples = field(repr=False, default=None)

    @property
    def any_truncated(self):
        return bool(np.any(self.truncated))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "R"])
            for t, v in zip(self.times, self.samples):
                w.writerow([repr(float(t)), repr(float(v))])


def _cumulative(data, r):
    return cumulative_trapezoid(data.values ** r, data.times, initial=0.0)


def _window_integral(data, cum, a, b):
    a = np.clip(a, data.times[0], data.times[-1])
    b = np.clip(b, data.times[0], data.times[-1])
    return np.maximum(np.interp(b, data.times, cum) - np.interp(a, data.times, cum), 0.0)


def running_norm(data, r, T, grid=None):
    """R(t) = (∫_t^{t+T} ||f(s)||^r ds)^(1/r) for every t of ``grid``.

    ``grid`` defaults to the sample times.  Windows reaching past the last
    sample are integrated over the available part and flagged in ``truncated``.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if not T > 0:
        raise ValueError("window length T must be positive")
    if data.step > T / 10.0:
        raise ValueError(f"norm profile too coarse: step {data.step:.3g} exceeds T/10 = {T / 10:.3g}")
    grid = data.times if grid is None else np.asarray(grid, dtype=float)
    cum = _cumulative(data, r)
    ends = grid + T
    vals = _window_integral(data, cum, grid, ends) ** (1.0 / r)
    truncated = ends > data.horizon * (1 + 1e-12) + 1e-12
    return RunningNormProfile(float(r), float(data.q), float(T), grid, vals, truncated, data.source, data)


def m_norm(profile):
    """sup_t R(t) over the profile grid."""
    return float(np.max(profile.samples))


def is_m0(profile, tol, t_tail):
    """True when every complete window starting at or after ``t_tail`` has R below ``tol``."""
    sel = (profile.times >= t_tail) & ~profile.truncated
    if not np.any(sel):
        raise ValueError(f"profile has no complete window starting after t_tail={t_tail}")
    return bool(np.all(profile.samples[sel] < tol))


@dataclass
class WindowRatio:
    ratio: float
    bound: float

    @property
    def holds(self):
        return self.ratio <= self.bound * (1 + 1e-12)


def window_equivalence_ratio(profile_a, profile_b):
    """Ratio of m-norms for two window lengths of the same signal.

    With T <= T' the larger-window norm is at most ceil(T'/T) times the
    smaller-window norm; returns the measured ratio and that bound.
    """
    da, db = profile_a.data, profile_b.data
    same = da is db or (
        da is not None
        and db is not None
        and np.array_equal(da.times, db.times)
        and np.array_equal(da.values, db.values)
    )
    if profile_a.source != profile_b.source or not same:
        raise ValueError("profiles come from different signals")
    if profile_a.r != profile_b.r or profile_a.q != profile_b.q:
        raise ValueError("profiles use different exponents")
    small, large = sorted((profile_a, profile_b), key=lambda p: p.T)
    ms = m_norm(small)
    ml = m_norm(large)
    bound = float(math.ceil(large.T / small.T - 1e-12))
    if ms == 0:
        return WindowRatio(0.0 if ml == 0 else math.inf, bound)
    return WindowRatio(ml / ms, bound)


def embedding_factor(T, r, r_low, q, q_low, measure):
    """Constant T^((r-r')/(r r')) |Omega|^((q-q')/(q q')) of the monotone embedding."""
    if not (1 <= r_low <= r and 1 <= q_low <= q):
        raise ValueError("need 1 <= r' <= r and 1 <= q' <= q")
    return T ** ((r - r_low) / (r * r_low)) * measure ** ((q - q_low) / (q * q_low))


# -- convolution estimates ---------------------------------------------------


@dataclass
class Kernel:
    """Nonincreasing kernel h on [0, inf) with certified L^1 and sup norms."""

    fn: object
    l1: float
    sup: float

    def __call__(self, s):
        return np.asarray(self.fn(np.asarray(s, dtype=float)), dtype=float) * np.ones_like(s, dtype=float)


def exp_kernel(rate=1.0):
    return Kernel(lambda s: np.exp(-rate * s), 1.0 / rate, 1.0)


def box_kernel(width=1.0):
    return Kernel(lambda s: (s <= width).astype(float), float(width), 1.0)


def _check_kernel(kernel, grid):
    vals = kernel(grid)
    if np.any(np.diff(vals) > 1e-14 * max(1.0, np.max(np.abs(vals)))):
        raise ValueError("kernel must be nonincreasing")
    if np.any(vals < 0) or np.max(vals) > kernel.sup * (1 + 1e-12):
        raise ValueError("kernel values must lie in [0, sup]")
    return vals


def convolution_profile(data, kernel, r):
    """t_j -> ∫_0^{t_j} h(t_j - s) ||f(s)||^r ds by the trapezoid rule on a uniform grid."""
    t = data.times
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise ValueError("convolution needs a uniform sample grid")
    step = float(dt[0])
    hv = _check_kernel(kernel, t - t[0])
    gv = data.values ** r
    full = np.convolve(hv, gv)[: t.size]
    out = step * (full - 0.5 * (hv * gv[0] + hv[0] * gv))
    out[0] = 0.0
    return np.maximum(out, 0.0)


@dataclass
class ConvolutionBound:
    times: np.ndarray
    lhs: np.ndarray
    rhs: float

    @property
    def holds(self):
        return bool(np.all(self.lhs <= self.rhs * (1 + 1e-12) + 1e-15))


def convolution_bound_check(profile, kernel):
    """Both sides of ∫_0^t h(t-s)||f(s)||^r ds <= (||h||_inf + (2/T)||h||_1) ||R||_inf^r."""
    data = profile.data
    lhs = convolution_profile(data, kernel, profile.r)
    rhs = (kernel.sup + 2.0 / profile.T * kernel.l1) * m_norm(profile) ** profile.r
    return ConvolutionBound(data.times, lhs, float(rhs))


@dataclass
class ConvolutionDecay:
    applicable: bool
    decays: bool
    tail_max: float
    lhs: np.ndarray = field(repr=False, default=None)


def convolution_decay_check(profile, kernel, tol=1e-6, t_tail=None, profile_tol=None):
    """Check that the kernel convolution tends to zero for a profile in the
    decaying subspace.

    ``applicable`` is False when the profile itself fails :func:`is_m0`
    (with ``profile_tol`` and the same tail); the convolution is still reported.
    """
    data = profile.data
    if t_tail is None:
        t_tail = 0.75 * data.horizon
    lhs = convolution_profile(data, kernel, profile.r)
    tail = lhs[data.times >= t_tail]
    tail_max = float(np.max(tail)) if tail.size else math.nan
    applicable = is_m0(profile, profile_tol if profile_tol is not None else tol, t_tail)
    return ConvolutionDecay(applicable, bool(tail.size and tail_max < tol), tail_max, lhs)
