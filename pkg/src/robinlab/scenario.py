"""Declarative scenarios: TOML configs, validation, execution and CSV reports.

Grammar (TOML)::

    name = "neumann_decay"          # optional, defaults to the file stem
    seed = 0                        # optional, used by random panels
    output = "out"                  # optional output directory

    [mesh]
    kind = "interval"               # interval | polygon | unit_square | l_shape | file
    n = 200                         # interval: number of cells
    # polygon: vertices = [[0,0],[1,0],[0,1]], h = 0.1
    # unit_square, l_shape: h (default 0.1) ; file: path = "m.txt"

    [coefficients]
    preset = "laplacian"            # see forms.coefficient_preset
    beta = 0.0                      # optional overrides: a, b, c, d, beta, mu

    [initial]
    u0 = "cos(pi*x)"                # number or expression in x, y

    [[f]]                           # volume forcing terms, summed
    kind = "trig"                   # constant | trig | decaying | compact | square
    profile = "cos(pi*x)"           # or pair = [left, right] for 1D boundary data
    eta = 2.0                       # trig: frequency; phase optional
    # decaying: rate ; compact: t0, t1 ; square: period ; amplitude optional

    [[g]]                           # boundary forcing terms, same keys

    [time]
    T = 1.0
    dt = 0.01
    theta = 1.0

    [[checks]]
    name = "l2_oracle"              # see ``lab list-checks``
    tol = 0.01                      # strictly positive
    label = "oracle"                # optional, names the CSV file
    params = { amplitude = "1/sqrt(2)", rate = "pi**2", times = [0.1] }

Numbers in ``params`` may be written as expressions in ``pi`` and ``e``.
"""
import csv
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from . import checks as _checks
from .forms import assemble, coefficient_preset
from .mesh import build_interval_mesh, build_polygon_mesh, l_shape, load_mesh, unit_square
from .signals import Signal, boundary_pair
from .solver import solve_parabolic, write_summary_csv


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` is a dotted path such as ``time.dt``."""

    def __init__(self, message, field=None, line=None, source=None):
        self.field = field
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}"
        if line:
            where += f":{line}"
        prefix = f"{where}: " if where else ""
        tag = f"[{field}] " if field else ""
        super().__init__(f"{prefix}{tag}{message}")


_TERM_KEYS = {"kind", "profile", "pair", "eta", "phase", "rate", "t0", "t1", "period", "amplitude"}
_COEFF_KEYS = {"preset", "a", "b", "c", "d", "beta", "mu"}
_TOP_KEYS = {"name", "seed", "output", "mesh", "coefficients", "initial", "f", "g", "time", "checks"}


@dataclass
class CheckSpec:
    name: str
    tol: float
    params: dict = field(default_factory=dict)
    label: str = None

    @property
    def key(self):
        return self.label or self.name


@dataclass
class Scenario:
    name: str
    mesh: dict
    coefficients: dict
    u0: object = 0.0
    f_terms: list = field(default_factory=list)
    g_terms: list = field(default_factory=list)
    T: float = None
    dt: float = None
    theta: float = 1.0
    checks: list = field(default_factory=list)
    seed: int = 0
    output: str = None
    source: str = None


# -- parsing -----------------------------------------------------------------


def _locate(text, path):
    """Best-effort line number of a dotted field path in the TOML text."""
    if not text or not path:
        return None
    parts = re.findall(r"[^.\[\]]+|\[\d+\]", path)
    section, index, key = None, 0, None
    if len(parts) == 1:
        key = parts[0]
    else:
        section = parts[0]
        rest = parts[1:]
        if rest and rest[0].startswith("["):
            index = int(rest[0][1:-1])
            rest = rest[1:]
        key = rest[0] if rest else None
    lines = text.splitlines()
    start = 0
    if section is not None:
        seen = -1
        header = re.compile(r"^\s*\[\[?\s*" + re.escape(section) + r"\s*\]\]?\s*$")
        for i, ln in enumerate(lines):
            if header.match(ln):
                seen += 1
                if seen == index:
                    start = i
                    break
        else:
            return None
        if key is None:
            return start + 1
    pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=") if key else None
    for i in range(start + (1 if section else 0), len(lines)):
        if section is not None and i > start and re.match(r"^\s*\[", lines[i]):
            break
        if section is None and re.match(r"^\s*\[", lines[i]):
            break
        if pat and pat.match(lines[i]):
            return i + 1
        if key and section is not None and re.search(r"\b" + re.escape(key) + r"\s*=", lines[i]):
            return i + 1
    return start + 1 if section else None


class _Reader:
    def __init__(self, text, source):
        self.text = text
        self.source = source

    def fail(self, message, path):
        raise ConfigError(message, path, _locate(self.text, path), self.source)

    def number(self, value, path, positive=False, allow_expr=True):
        if isinstance(value, bool):
            self.fail("expected a number", path)
        if isinstance(value, str) and allow_expr:
            try:
                value = _checks.number(value)
            except ValueError as exc:
                self.fail(str(exc), path)
        if not isinstance(value, (int, float)):
            self.fail(f"expected a number, got {value!r}", path)
        value = float(value)
        if not math.isfinite(value):
            self.fail("must be finite", path)
        if positive and not value > 0:
            self.fail(f"must be > 0, got {value}", path)
        return value

    def table(self, data, key, path, required=True):
        v = data.get(key)
        if v is None:
            if required:
                self.fail("missing section", path)
            return {}
        if not isinstance(v, dict):
            self.fail("expected a table", path)
        return v

    def unknown(self, data, allowed, path):
        extra = sorted(set(data) - set(allowed))
        if extra:
            self.fail(f"unknown key(s) {', '.join(extra)}", f"{path}.{extra[0]}" if path else extra[0])


def _parse_mesh(r, m):
    kind = m.get("kind", "interval")
    allowed = {"interval": {"kind", "n"}, "polygon": {"kind", "vertices", "h"}, "unit_square": {"kind", "h"},
               "l_shape": {"kind", "h"}, "file": {"kind", "path"}}
    if kind not in allowed:
        r.fail(f"unknown mesh kind {kind!r}; expected one of {', '.join(allowed)}", "mesh.kind")
    r.unknown(m, allowed[kind], "mesh")
    out = {"kind": kind}
    if kind == "interval":
        n = m.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 2:
            r.fail(f"interval mesh needs an integer n >= 2, got {n!r}", "mesh.n")
        out["n"] = n
    elif kind == "polygon":
        verts = m.get("vertices")
        if not isinstance(verts, list) or len(verts) < 3 or any(not isinstance(v, list) or len(v) != 2 for v in verts):
            r.fail("polygon needs a list of at least three [x, y] vertices", "mesh.vertices")
        out["vertices"] = [[r.number(c, "mesh.vertices") for c in v] for v in verts]
        out["h"] = r.number(m.get("h"), "mesh.h", positive=True)
    elif kind in ("unit_square", "l_shape"):
        if "h" in m:
            out["h"] = r.number(m["h"], "mesh.h", positive=True)
    else:
        if not isinstance(m.get("path"), str):
            r.fail("mesh file needs a path", "mesh.path")
        out["path"] = m["path"]
    return out


def _parse_terms(r, terms, section):
    if terms is None:
        return []
    if not isinstance(terms, list):
        r.fail("expected an array of tables [[...]]", section)
    out = []
    for i, t in enumerate(terms):
        path = f"{section}[{i}]"
        if not isinstance(t, dict):
            r.fail("expected a table", path)
        r.unknown(t, _TERM_KEYS, path)
        kind = t.get("kind")
        need = {"constant": (), "trig": ("eta",), "decaying": ("rate",), "compact": ("t0", "t1"), "square": ("period",)}
        if kind not in need:
            r.fail(f"unknown term kind {kind!r}; expected one of {', '.join(need)}", f"{path}.kind")
        term = {"kind": kind, "amplitude": r.number(t.get("amplitude", 1.0), f"{path}.amplitude")}
        for key in need[kind]:
            if key not in t:
                r.fail(f"{kind} term needs {key}", f"{path}.{key}")
        for key in ("eta", "phase", "rate", "t0", "t1", "period"):
            if key in t:
                term[key] = r.number(t[key], f"{path}.{key}", positive=key in ("rate", "period"))
        if "pair" in t and "profile" in t:
            r.fail("give either profile or pair", f"{path}.pair")
        if "pair" in t:
            p = t["pair"]
            if not isinstance(p, list) or len(p) != 2:
                r.fail("pair must be [left, right]", f"{path}.pair")
            term["pair"] = [r.number(v, f"{path}.pair") for v in p]
        else:
            prof = t.get("profile", 1.0)
            if isinstance(prof, str):
                try:
                    _checks.Expression(prof)
                except ValueError as exc:
                    r.fail(str(exc), f"{path}.profile")
            elif not isinstance(prof, (int, float)) or isinstance(prof, bool):
                r.fail("profile must be a number or an expression", f"{path}.profile")
            term["profile"] = prof
        if kind == "compact" and not term["t1"] > term["t0"]:
            r.fail("compact term needs t1 > t0", f"{path}.t1")
        out.append(term)
    return out


def _parse_checks(r, items):
    if not items:
        r.fail("scenario lists no checks", "checks")
    if not isinstance(items, list):
        r.fail("expected an array of tables [[checks]]", "checks")
    out, keys = [], set()
    for i, c in enumerate(items):
        path = f"checks[{i}]"
        if not isinstance(c, dict):
            r.fail("expected a table", path)
        r.unknown(c, {"name", "tol", "params", "label"}, path)
        name = c.get("name")
        if name not in _checks.CHECKS:
            r.fail(f"unknown check {name!r}; run 'lab list-checks'", f"{path}.name")
        if "tol" not in c:
            r.fail("missing tolerance", f"{path}.tol")
        tol = r.number(c["tol"], f"{path}.tol", positive=True)
        params = c.get("params", {})
        if not isinstance(params, dict):
            r.fail("params must be a table", f"{path}.params")
        spec = CheckSpec(name, tol, dict(params), c.get("label"))
        if spec.key in keys:
            r.fail(f"duplicate check {spec.key!r}; add a distinct label", f"{path}.label")
        keys.add(spec.key)
        out.append(spec)
    return out


def parse_scenario(text, source=None, default_name=None):
    """Parse and validate a scenario from TOML text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(str(exc), None, int(m.group(1)) if m else None, source) from None
    r = _Reader(text, source)
    r.unknown(data, _TOP_KEYS, "")
    name = data.get("name", default_name)
    if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
        r.fail(f"scenario name must be a plain identifier, got {name!r}", "name")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        r.fail("seed must be a nonnegative integer", "seed")

    mesh = _parse_mesh(r, r.table(data, "mesh", "mesh"))

    coeffs = r.table(data, "coefficients", "coefficients", required=False)
    r.unknown(coeffs, _COEFF_KEYS, "coefficients")
    coeffs = dict(coeffs)
    coeffs.setdefault("preset", "laplacian")
    if "mu" in coeffs:
        coeffs["mu"] = r.number(coeffs["mu"], "coefficients.mu", positive=True)
    try:
        _build_coefficients(coeffs)
    except (ValueError, TypeError) as exc:
        r.fail(str(exc), "coefficients.preset")

    initial = r.table(data, "initial", "initial", required=False)
    r.unknown(initial, {"u0"}, "initial")
    u0 = initial.get("u0", 0.0)
    if isinstance(u0, str):
        try:
            _checks.Expression(u0)
        except ValueError as exc:
            r.fail(str(exc), "initial.u0")
    else:
        u0 = r.number(u0, "initial.u0")

    sc = Scenario(name, mesh, coeffs, u0, _parse_terms(r, data.get("f"), "f"), _parse_terms(r, data.get("g"), "g"),
                  seed=seed, output=data.get("output"), source=source)

    tm = r.table(data, "time", "time", required=False)
    if tm:
        r.unknown(tm, {"T", "dt", "theta"}, "time")
        for key in ("T", "dt"):
            if key not in tm:
                r.fail("missing value", f"time.{key}")
        sc.T = r.number(tm["T"], "time.T", positive=True)
        sc.dt = r.number(tm["dt"], "time.dt", positive=True)
        if sc.dt > sc.T:
            r.fail(f"dt = {sc.dt} exceeds T = {sc.T}", "time.dt")
        sc.theta = r.number(tm.get("theta", 1.0), "time.theta")
        if not 0.5 <= sc.theta <= 1.0:
            r.fail(f"theta must lie in [0.5, 1], got {sc.theta}", "time.theta")
    sc.checks = _parse_checks(r, data.get("checks"))
    return sc


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, None, str(path)) from None
    return parse_scenario(text, str(path), path.stem)


# -- building ----------------------------------------------------------------


def _build_coefficients(spec):
    overrides = {k: v for k, v in spec.items() if k != "preset"}
    return coefficient_preset(spec["preset"], **overrides)


def _build_mesh(spec):
    kind = spec["kind"]
    if kind == "interval":
        return build_interval_mesh(spec["n"])
    if kind == "polygon":
        return build_polygon_mesh(spec["vertices"], spec["h"])
    if kind in ("unit_square", "l_shape"):
        verts = unit_square() if kind == "unit_square" else l_shape()
        return build_polygon_mesh(verts, spec.get("h", 0.1))
    return load_mesh(spec["path"])


def _build_signal(terms, target):
    sig = Signal.zero(target)
    for t in terms:
        prof = boundary_pair(*t["pair"]) if "pair" in t else t["profile"]
        kind = t["kind"]
        if kind == "constant":
            s = Signal.constant(prof, target)
        elif kind == "trig":
            s = Signal.trig([(t["eta"], prof, t.get("phase", 0.0))], target)
        elif kind == "decaying":
            s = Signal.decaying(prof, t["rate"], target)
        elif kind == "compact":
            s = Signal.compact(prof, t["t0"], t["t1"], target)
        else:
            s = Signal.square_wave(prof, t["period"], target)
        sig = sig + s.scale(t["amplitude"])
    return sig


class Context:
    """Lazily built mesh, system, data and trajectory of one scenario run."""

    boundary_pair = staticmethod(boundary_pair)

    def __init__(self, scenario, seed=None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.cache = {}
        self._mesh = self._system = self._traj = None

    @property
    def mesh(self):
        if self._mesh is None:
            self._mesh = _build_mesh(self.scenario.mesh)
        return self._mesh

    @property
    def coeffs(self):
        return self.system.coeffs

    @property
    def system(self):
        if self._system is None:
            self._system = assemble(self.mesh, _build_coefficients(self.scenario.coefficients))
        return self._system

    @property
    def u0(self):
        return self.scenario.u0

    @property
    def f(self):
        return _build_signal(self.scenario.f_terms, "volume")

    @property
    def g(self):
        return _build_signal(self.scenario.g_terms, "boundary")

    @property
    def has_trajectory(self):
        return self._traj is not None

    @property
    def trajectory(self):
        if self._traj is None:
            sc = self.scenario
            if sc.T is None:
                raise ConfigError("this check needs a [time] section", "time", None, sc.source)
            self._traj = solve_parabolic(self.system, sc.u0, self.f, self.g, sc.T, sc.dt, sc.theta)
        return self._traj


# -- reports -----------------------------------------------------------------


@dataclass
class ScenarioReport:
    name: str
    results: list = field(default_factory=list)
    error: str = None
    elapsed: float = 0.0
    seed: int = 0

    @property
    def passed(self):
        return self.error is None and all(r.passed for r in self.results)


def _fmt(v):
    if isinstance(v, (bool, str)) or v is None:
        return str(v)
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    try:
        return repr(float(v))
    except (TypeError, ValueError):
        return str(v)


def _write_table(path, header, rows):
    with open(path.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    # whitespace-separated copy for gnuplot's default column layout
    with open(path.with_suffix(".dat"), "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def _details(d):
    return "; ".join(f"{k}={_fmt(v) if not isinstance(v, list) else v}" for k, v in sorted(d.items()))


SUMMARY_HEADER = ["scenario", "check", "status", "measured", "tol", "details"]


def _summary_rows(report):
    if report.error is not None:
        return [[report.name, "", "ERROR", "", "", report.error]]
    return [[report.name, getattr(r, "key", r.name), "PASS" if r.passed else "FAIL", _fmt(r.measured), _fmt(r.tol),
             _details(r.details)] for r in report.results]


def _write_summary(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        w.writerows(rows)


def run_scenario(scenario, out_dir=None, seed=None, log=None):
    """Run every check of ``scenario``; failures and check errors are reported, not raised.

    Writes ``<out>/<name>/<check>.csv`` (plus a .dat copy) for checks with a
    table, ``trajectory.csv`` when a trajectory was computed, and
    ``summary.csv``.  Returns a :class:`ScenarioReport`.
    """
    if isinstance(scenario, (str, os.PathLike)):
        scenario = load_scenario(scenario)
    ctx = Context(scenario, seed)
    report = ScenarioReport(scenario.name, seed=ctx.seed)
    start = time.perf_counter()
    out = None
    if out_dir is None and scenario.output:
        out_dir = scenario.output
    if out_dir is not None:
        out = Path(out_dir) / scenario.name
        out.mkdir(parents=True, exist_ok=True)
    for spec in scenario.checks:
        try:
            res = _checks.CHECKS[spec.name](ctx, spec)
        except ConfigError:
            raise
        except Exception as exc:  # a broken check is a failed check
            res = _checks.CheckResult(spec.name, False, math.nan, spec.tol, {"error": f"{type(exc).__name__}: {exc}"})
        res.key = spec.key
        report.results.append(res)
        if log:
            log(f"  {scenario.name}/{res.summary()}")
        if out is not None and res.table is not None:
            _write_table(out / spec.key, *res.table)
    report.elapsed = time.perf_counter() - start
    if out is not None:
        if ctx.has_trajectory:
            write_summary_csv(ctx.trajectory, out / "trajectory.csv")
        _write_summary(out / "summary.csv", _summary_rows(report))
    return report


def _run_path(args):
    path, out_dir, seed = args
    try:
        return run_scenario(load_scenario(path), out_dir, seed)
    except ConfigError as exc:
        return ScenarioReport(Path(path).stem, error=str(exc))
    except Exception as exc:
        return ScenarioReport(Path(path).stem, error=f"{type(exc).__name__}: {exc}")


def run_suite(directory, out_dir=None, seed=None, threads=1, log=None):
    """Run every ``*.toml`` in ``directory`` (sorted by file name) and write one summary table.

    Scenarios are isolated: a config error or crash marks only that
    scenario.  Returns the reports in name order.
    """
    paths = sorted(Path(directory).glob("*.toml"), key=lambda p: p.name)
    jobs = [(str(p), out_dir, seed) for p in paths]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(_run_path, jobs))
    else:
        reports = [_run_path(j) for j in jobs]
    if log:
        for rep in reports:
            status = "PASS" if rep.passed else ("ERROR" if rep.error else "FAIL")
            log(f"{status} {rep.name} ({rep.elapsed:.1f} s)" + (f": {rep.error}" if rep.error else ""))
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        rows = [row for rep in reports for row in _summary_rows(rep)]
        _write_summary(Path(out_dir) / "suite_summary.csv", rows)
    return reports


def bundled_scenarios():
    """Directory of the scenarios shipped with the package."""
    return Path(__file__).with_name("scenarios")
