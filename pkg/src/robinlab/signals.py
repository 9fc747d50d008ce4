"""Time-dependent volume and boundary data.

A :class:`Signal` is a finite sum of separable terms ``envelope(t) * profile(x)``
plus optional tabulated data.  Profiles are numbers, expression strings,
callables of the point array, or nodal vectors.
"""
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Term:
    kind: str
    profile: object = 1.0
    amplitude: float = 1.0
    eta: float = 0.0
    phase: float = 0.0
    rate: float = 0.0
    t0: float = 0.0
    t1: float = np.inf
    period: float = 1.0

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            e = np.ones_like(t)
        elif self.kind == "trig":
            e = np.cos(self.eta * t + self.phase)
        elif self.kind == "decaying":
            e = np.exp(-self.rate * t)
        elif self.kind == "compact":
            e = ((t >= self.t0) & (t < self.t1)).astype(float)
        elif self.kind == "square":
            # +1 on the first half period, -1 on the second; the offset keeps
            # samples that land on a switching time on a consistent side
            half = np.floor(2.0 * t / self.period + 1e-9)
            e = np.where(np.mod(half, 2.0) == 0.0, 1.0, -1.0)
        else:
            raise ValueError(f"unknown signal term {self.kind!r}")
        return self.amplitude * e


@dataclass(frozen=True)
class Tabulated:
    times: np.ndarray
    values: np.ndarray  # (nt, ndof) nodal values

    def sample(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1)
        nxt = np.minimum(idx + 1, len(self.times) - 1)
        span = self.times[nxt] - self.times[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(span > 0, (t - self.times[idx]) / np.where(span > 0, span, 1.0), 0.0)
        w = np.clip(w, 0.0, 1.0)
        return (1.0 - w)[:, None] * self.values[idx] + w[:, None] * self.values[nxt]


@dataclass(frozen=True)
class Signal:
    terms: tuple = ()
    tables: tuple = ()
    target: str = "volume"

    def __post_init__(self):
        if self.target not in ("volume", "boundary"):
            raise ValueError(f"signal target must be 'volume' or 'boundary', got {self.target!r}")
        if any(t.eta < 0 for t in self.terms):
            raise ValueError("trig frequencies are stored as non-negative numbers")

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, target="volume"):
        return cls((), (), target)

    @classmethod
    def constant(cls, profile, target="volume"):
        return cls((Term("constant", profile),), (), target)

    @classmethod
    def trig(cls, components, target="volume"):
        """``components``: iterable of (eta, profile) or (eta, profile, phase)."""
        terms = []
        for comp in components:
            eta, profile = float(comp[0]), comp[1]
            phase = float(comp[2]) if len(comp) > 2 else 0.0
            terms.append(Term("trig", profile, eta=abs(eta), phase=phase))
        etas = [t.eta for t in terms]
        if len(set(etas)) != len(etas):
            raise ValueError("trig polynomial frequencies must be pairwise distinct")
        return cls(tuple(terms), (), target)

    @classmethod
    def decaying(cls, profile, rate, target="volume"):
        if rate <= 0:
            raise ValueError("decay rate must be positive")
        return cls((Term("decaying", profile, rate=float(rate)),), (), target)

    @classmethod
    def compact(cls, profile, t0, t1, target="volume"):
        if not t1 > t0:
            raise ValueError("compact support needs t1 > t0")
        return cls((Term("compact", profile, t0=float(t0), t1=float(t1)),), (), target)

    @classmethod
    def square_wave(cls, profile, period, target="volume"):
        if period <= 0:
            raise ValueError("period must be positive")
        return cls((Term("square", profile, period=float(period)),), (), target)

    @classmethod
    def tabulated(cls, times, values, target="volume"):
        times = np.asarray(times, dtype=float)
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[0] != times.shape[0] or np.any(np.diff(times) <= 0):
            raise ValueError("tabulated signal needs strictly increasing times matching the value rows")
        return cls((), (Tabulated(times, values),), target)

    def __add__(self, other):
        if other.target != self.target:
            raise ValueError("cannot add volume and boundary signals")
        return Signal(self.terms + other.terms, self.tables + other.tables, self.target)

    def scale(self, factor):
        terms = tuple(replace(t, amplitude=t.amplitude * factor) for t in self.terms)
        tables = tuple(Tabulated(tb.times, tb.values * factor) for tb in self.tables)
        return Signal(terms, tables, self.target)

    def __mul__(self, factor):
        return self.scale(float(factor))

    __rmul__ = __mul__

    # -- queries -------------------------------------------------------------

    @property
    def is_zero(self):
        return not self.terms and not self.tables

    def frequencies(self):
        """Nonzero angular frequencies (both signs) of the trig part, plus 0
        when a constant term is present."""
        out = set()
        for t in self.terms:
            if t.kind == "trig":
                out.update({t.eta, -t.eta})
            elif t.kind == "constant":
                out.add(0.0)
        return sorted(out)

    def profile_matrix(self, system):
        """Nodal values of all term profiles, shape (nterms, ndof)."""
        if not self.terms:
            return np.zeros((0, system.ndof))
        return np.vstack([system.nodal(t.profile) for t in self.terms])

    def envelopes(self, times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if not self.terms:
            return np.zeros((times.size, 0))
        return np.column_stack([t.envelope(times) for t in self.terms])

    def sample(self, system, times):
        """Nodal values at each time, shape (nt, ndof)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = self.envelopes(times) @ self.profile_matrix(system)
        for tb in self.tables:
            if tb.values.shape[1] != system.ndof:
                raise ValueError("tabulated signal does not match the mesh")
            out = out + tb.sample(times)
        return out

    def nodal(self, system, t):
        return self.sample(system, [t])[0]


def as_signal(value, target="volume"):
    if value is None:
        return Signal.zero(target)
    if isinstance(value, Signal):
        return value
    return Signal.constant(value, target)


def boundary_pair(left, right):
    """1D boundary profile with value ``left`` at x=0 and ``right`` at x=1."""

    def profile(x):
        x = np.atleast_2d(x)
        return np.where(x[:, 0] < 0.5, float(left), float(right))

    return profile
