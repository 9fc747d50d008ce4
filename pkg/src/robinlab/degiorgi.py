"""De Giorgi machinery: the iteration lemma, level sets of discrete solutions,
truncated energy inequalities and sup-norm a priori bounds."""
import csv
import math
import warnings
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from gmpy2 import mpfr
from scipy.integrate import trapezoid

from . import _kernels
from .forms import _cell_geometry
from .norms import lq_norms, signal_mixed_norm, time_lr

# -- iteration lemma ---------------------------------------------------------


PRECISION_BITS = 160


def _ctx(bits):
    return gmpy2.context(gmpy2.get_context(), precision=bits)


@dataclass(frozen=True)
class IterationParams:
    c: float
    b: float
    eps: float
    delta: float

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError("c must be nonnegative")
        if not self.b >= 1:
            raise ValueError("b must be at least 1")
        if not (self.eps > 0 and self.delta > 0):
            raise ValueError("eps and delta must be positive")

    def exact(self):
        """Parameters, d and log(lambda) as MPFR numbers of the current precision."""
        c, b, e, dl = (mpfr(v) for v in (self.c, self.b, self.eps, self.delta))
        d = min(dl, e / (1 + e))
        if c == 0:
            return c, b, e, dl, d, mpfr("inf")
        l2c, lb = gmpy2.log(2 * c), gmpy2.log(b)
        ll = min(-l2c / dl - lb / (dl * d), -(1 + e) / e * l2c - lb / (e * d))
        return c, b, e, dl, d, ll

    @property
    def d(self):
        return min(self.delta, self.eps / (1 + self.eps))

    @property
    def lam(self):
        with _ctx(PRECISION_BITS):
            return float(gmpy2.exp(self.exact()[5]))


@dataclass
class IterationResult:
    params: IterationParams
    applicable: bool
    min_margin: float
    margins: np.ndarray  # per n, min of the y and z relative margins
    log_y: np.ndarray
    log_z: np.ndarray
    slack: float

    @property
    def holds(self):
        return self.applicable and self.min_margin >= -self.slack


def _log(v):
    v = mpfr(v)
    if v < 0:
        raise ValueError("sequences must be nonnegative")
    return gmpy2.log(v)


def _logaddexp(a, b):
    hi, lo = (a, b) if a >= b else (b, a)
    if gmpy2.is_infinite(hi):
        return hi
    return hi + gmpy2.log1p(gmpy2.exp(lo - hi))


def iteration_lemma_verify(params, y0=None, z0=None, n_max=60, bits=PRECISION_BITS):
    """Run the saturated recurrence and compare with the geometric envelope.

    y_{n+1} = c b^n (y_n^{1+δ} + z_n^{1+ε} y_n^δ), z_{n+1} = c b^n (y_n + z_n^{1+ε}),
    carried out on logarithms in ``bits``-bit MPFR arithmetic.  ``y0``/``z0``
    default to the hypothesis boundary λ and λ^{1/(1+ε)}.  Margins are
    1 - y_n / (λ b^{-n/d}) and the same for z; they vanish up to rounding
    where the lemma is sharp, so ``holds`` allows ``slack`` = 2^(24-bits).
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    with _ctx(bits):
        c, b, e, dl, d, ll = params.exact()
        if c == 0:
            # lambda is infinite: every nonnegative start is admissible and y_n = z_n = 0 for n >= 1
            ones = np.ones(n_max + 1)
            return IterationResult(params, True, 1.0, ones, np.full(n_max + 1, -np.inf), np.full(n_max + 1, -np.inf), 0.0)
        lc = _log(c)
        lb = gmpy2.log(b)
        ly = ll if y0 is None else _log(y0)
        lz = ll / (1 + e) if z0 is None else _log(z0)
        applicable = ly <= ll and lz <= ll / (1 + e)
        log_y, log_z, gaps = [], [], []
        for n in range(n_max + 1):
            lY = ll - n * lb / d
            # log-distance to the envelope; the relative margin is -expm1(-gap)
            gaps.append(min(lY - ly, lY / (1 + e) - lz))
            log_y.append(ly)
            log_z.append(lz)
            if n == n_max:
                break
            L = _logaddexp(ly, (1 + e) * lz)
            base = lc + n * lb + L
            ly, lz = base + dl * ly, base
        margins = -np.expm1(-np.array([float(g) for g in gaps]))
        return IterationResult(
            params,
            bool(applicable),
            float(-gmpy2.expm1(-min(gaps))),
            margins,
            np.array([float(v) for v in log_y]),
            np.array([float(v) for v in log_z]),
            2.0 ** (24 - bits),
        )


def random_parameter_grid(count, seed=0):
    """Tuples with c in [0.1, 10], b in [1, 8], eps and delta in [0.1, 3]."""
    rng = np.random.default_rng(seed)
    cols = (rng.uniform(0.1, 10, count), rng.uniform(1, 8, count), rng.uniform(0.1, 3, count), rng.uniform(0.1, 3, count))
    return [IterationParams(*map(float, row)) for row in zip(*cols)]


def verify_parameter_grid(params_list, n_max=60, bits=PRECISION_BITS):
    return [iteration_lemma_verify(p, n_max=n_max, bits=bits) for p in params_list]


def write_iteration_report(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["c", "b", "eps", "delta", "lambda", "min_margin", "n_max"])
        for r in results:
            p = r.params
            w.writerow([repr(p.c), repr(p.b), repr(p.eps), repr(p.delta), repr(p.lam), repr(r.min_margin), len(r.margins) - 1])


# -- exponents ---------------------------------------------------------------


@dataclass(frozen=True)
class Exponents:
    """Space-time exponents (r1, q1) for volume data and (r2, q2) for boundary data."""

    r1: float
    q1: float
    r2: float
    q2: float
    N: int

    def __post_init__(self):
        if self.N not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        for name in ("r1", "q1", "r2", "q2"):
            if not getattr(self, name) >= 2:
                raise ValueError(f"{name} must be at least 2")
        if not self.kappa1 > 0:
            raise ValueError("volume exponents violate 1/r1 + N/(2 q1) < 1")
        if not self.kappa2 > 0:
            raise ValueError("boundary exponents violate 1/r2 + (N-1)/(2 q2) < 1/2")

    @property
    def kappa1(self):
        return 2.0 * (1.0 - 1.0 / self.r1 - self.N / (2.0 * self.q1)) / self.N

    @property
    def kappa2(self):
        return 2.0 * (0.5 - 1.0 / self.r2 - (self.N - 1) / (2.0 * self.q2)) / self.N

    def level_terms(self):
        """(r, q, kappa) triples of the level-set terms for bounded coefficients.

        Volume: the forcing term and the zero-order coefficient term.
        Boundary: the forcing term and the Robin weight term.  Every triple
        satisfies 1/r + N/(2q) = N/4 (volume) or 1/r + (N-1)/(2q) = N/4 (boundary).
        """
        N, k1, k2 = self.N, self.kappa1, self.kappa2
        vol = [
            (2 * (1 + k1) * self.r1 / (self.r1 - 1), 2 * (1 + k1) * self.q1 / (self.q1 - 1), k1),
            (2 * (1 + 2.0 / N), 2 * (1 + 2.0 / N), 2.0 / N),
        ]
        bd = [
            (2 * (1 + k2) * self.r2 / (self.r2 - 1), 2 * (1 + k2) * self.q2 / (self.q2 - 1), k2),
            (2 * (1 + 1.0 / N), 2 * (1 + 1.0 / N), 1.0 / N),
        ]
        return vol, bd


def aniso_pair_defects(N, r1, q1, r2, q2):
    return (1.0 / r1 + N / (2.0 * q1) - N / 4.0, 1.0 / r2 + (N - 1) / (2.0 * q2) - N / 4.0)


# -- level sets --------------------------------------------------------------


def truncation_integrals(system, states, k):
    """Per state: |A_k|, |B_k|, ∫((u-k)^+)^2 and ∫|∇(u-k)^+|^2, all exact for P1."""
    mesh = system.mesh
    U = np.atleast_2d(states)
    nt = U.shape[0]
    cells = mesh.cells
    vals = U[:, cells].reshape(nt * mesh.ncells, -1)
    meas = np.tile(mesh.cell_measures, nt)
    above, sq = _kernels.superlevel_cells(vals, meas, k)
    above = above.reshape(nt, -1)
    sq = sq.reshape(nt, -1)
    G = _cell_geometry(mesh)[3]
    grads = np.einsum("tev,evd->ted", U[:, cells], G)
    grad_sq = np.einsum("ted,ted->te", grads, grads)
    fv = U[:, mesh.facets].reshape(nt * mesh.nfacets, -1)
    fmeas = np.tile(mesh.facet_measures, nt)
    b_above, _ = _kernels.superlevel_cells(fv, fmeas, k)
    return (
        above.sum(axis=1),
        b_above.reshape(nt, -1).sum(axis=1),
        sq.sum(axis=1),
        (grad_sq * above).sum(axis=1),
    )


@dataclass
class LevelSetProfile:
    k: float
    times: np.ndarray
    A: np.ndarray
    B: np.ndarray
    trunc_l2_sq: np.ndarray
    trunc_grad_sq: np.ndarray

    @property
    def q_norm_sq(self):
        return q_norm_sq(self.times, self.trunc_l2_sq, self.trunc_grad_sq)


def q_norm_sq(times, l2_sq, grad_sq):
    """sup_t ∫|u|^2 + ∫∫|∇u|^2 over the sampled window."""
    integral = trapezoid(grad_sq, times) if len(times) > 1 else 0.0
    return float(np.max(l2_sq) + integral)


def _window_index(times, tau):
    if not tau > 0:
        raise ValueError("window length must be positive")
    span = times[-1] - times[0]
    if tau > span * (1 + 1e-12) + 1e-12:
        raise ValueError(f"window {tau} longer than the trajectory span {span}")
    return int(np.searchsorted(times, times[-1] - tau - 1e-9 * max(1.0, tau)))


def level_sets(traj, k, tau):
    """Level-set data of the trajectory on its final window of length ``tau``."""
    i = _window_index(traj.times, tau)
    U = traj.states[i:]
    if k < U.min():
        warnings.warn(f"level {k} lies below min u; the level set is the whole domain", RuntimeWarning, stacklevel=2)
    A, B, l2, gr = truncation_integrals(traj.system, U, k)
    return LevelSetProfile(float(k), traj.times[i:], A, B, l2, gr)


# -- truncated energy inequality ---------------------------------------------


def forcing_level(traj, f, g, exps, t0=None):
    """k-hat = (||f||^2_{L^r1 L^q1} + ||g||^2_{L^r2 L^q2(bd)})^(1/2) over the trajectory."""
    s = traj.system
    times = traj.times if t0 is None else traj.times[traj.times >= t0]
    nf = signal_mixed_norm(s, f, times, exps.r1, exps.q1, boundary=False) if f is not None else 0.0
    ng = signal_mixed_norm(s, g, times, exps.r2, exps.q2, boundary=True) if g is not None else 0.0
    return math.sqrt(nf ** 2 + ng ** 2)


@dataclass
class CaccioppoliResult:
    lhs: float
    rhs_terms: dict
    gamma_required: float
    k_hat: float


def caccioppoli_check(traj, f, g, k, tau, sigma, exps):
    """Evaluate both sides of the truncated energy inequality on the final window.

    lhs = ||u^(k)||^2_{Q((1-σ)τ)}; the right side without γ is
    (1/(στ)) ∫∫|u^(k)|^2 + k^2 Σ (∫|A_k|^{r/q})^{2(1+κ)/r} + k^2 Σ (∫|B_k|^{r/q})^{2(1+κ)/r}.
    Returns the smallest γ making the inequality hold.
    """
    if not isinstance(exps, Exponents):
        raise TypeError("exponents must be an Exponents instance")
    if exps.N != traj.system.mesh.dim:
        raise ValueError("exponent dimension does not match the mesh")
    if not 0 < sigma < 0.5:
        raise ValueError("sigma must lie in (0, 1/2)")
    k_hat = forcing_level(traj, f, g, exps)
    if k < k_hat * (1 - 1e-12):
        raise ValueError(f"level k={k} below the forcing level k_hat={k_hat}")
    prof = level_sets(traj, k, tau)
    t = prof.times
    inner = t >= t[-1] - (1 - sigma) * tau - 1e-9 * max(1.0, tau)
    lhs = q_norm_sq(t[inner], prof.trunc_l2_sq[inner], prof.trunc_grad_sq[inner])
    energy = trapezoid(prof.trunc_l2_sq, t) / (sigma * tau)
    vol_terms, bd_terms = exps.level_terms()
    vol = sum(trapezoid(prof.A ** (r / q), t) ** (2 * (1 + kap) / r) for r, q, kap in vol_terms)
    bd = sum(trapezoid(prof.B ** (r / q), t) ** (2 * (1 + kap) / r) for r, q, kap in bd_terms)
    terms = {"energy": float(energy), "volume": float(k * k * vol), "boundary": float(k * k * bd)}
    total = sum(terms.values())
    if lhs == 0:
        gamma = 0.0
    elif total == 0:
        gamma = math.inf
    else:
        gamma = lhs / total
    return CaccioppoliResult(float(lhs), terms, float(gamma), float(k_hat))


# -- sup-norm bound ----------------------------------------------------------


@dataclass
class SupBound:
    sup_norm: float
    rhs: float
    ratio: float


def sup_bound_check(traj, f, g, exps, global_=False):
    """sup |u| over [T/2, T] (or [0, T]) against
    (||u||^2_{L^2 L^2} + ||f||^2_{L^r1 L^q1} + ||g||^2_{L^r2 L^q2(bd)})^(1/2)."""
    s = traj.system
    t = traj.times
    T0, T = t[0], t[-1]
    sel = slice(None) if global_ else t >= T0 + 0.5 * (T - T0) - 1e-9 * max(1.0, T)
    sup = float(np.max(np.abs(traj.states[sel])))
    l2 = lq_norms(s.mesh, traj.states, 2.0)
    u_sq = time_lr(t, l2, 2.0) ** 2
    rhs = math.sqrt(u_sq + forcing_level(traj, f, g, exps) ** 2)
    if rhs == 0:
        return SupBound(sup, 0.0, 0.0)
    return SupBound(sup, rhs, sup / rhs)


# -- anisotropic embedding ---------------------------------------------------


@dataclass
class EmbeddingEstimate:
    constant: float
    ratios: list = field(default_factory=list)
    skipped: int = 0


def aniso_embedding_estimate(mesh, exps_pair, samples, system=None, tol=1e-12):
    """Largest ||u||_{L^r1 L^q1} + ||u||_{L^r2 L^q2(bd)} over ||u||_{Q} among samples.

    ``exps_pair`` is (r1, q1, r2, q2) satisfying the equality relations;
    ``samples`` are (times, states) pairs.  Zero samples are skipped.
    """
    r1, q1, r2, q2 = exps_pair
    dv, db = aniso_pair_defects(mesh.dim, r1, q1, r2, q2)
    if abs(dv) > tol or abs(db) > tol or min(r1, q1, r2, q2) < 2:
        raise ValueError("exponents violate 1/r1 + N/(2q1) = N/4 or 1/r2 + (N-1)/(2q2) = N/4")
    G = _cell_geometry(mesh)[3]
    out = EmbeddingEstimate(0.0)
    for times, states in samples:
        states = np.atleast_2d(states)
        times = np.asarray(times, dtype=float)
        lhs = time_lr(times, lq_norms(mesh, states, q1), r1) + time_lr(times, lq_norms(mesh, states, q2, boundary=True), r2)
        l2_sq = lq_norms(mesh, states, 2.0) ** 2
        grads = np.einsum("tev,evd->ted", states[:, mesh.cells], G)
        grad_sq = np.einsum("ted,ted,e->t", grads, grads, mesh.cell_measures)
        q = math.sqrt(q_norm_sq(times, l2_sq, grad_sq))
        if q == 0:
            out.skipped += 1
            continue
        out.ratios.append(lhs / q)
    out.constant = max(out.ratios) if out.ratios else 0.0
    return out
