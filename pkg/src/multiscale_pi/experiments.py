"""Scaling experiments on the toy system and their plain-text I/O.

Three sweeps are supported, each running PI and measuring the discretization
error ``|y^n - Y(t^n)|`` against an RK4 solution of the reduced system:

* ``dt_macro_scaling``: vary the macrostep at a fixed horizon ``T``;
* ``eps_scaling``: vary ``eps`` at fixed step sizes and step count;
* ``dn_scaling``: vary the initial offset of ``x`` from the manifold and
  regress against the measured running distance ``|d^n|``.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .analysis import (
    LEDGER_PRESETS,
    AssumptionReport,
    ConstantsLedger,
    check_assumptions,
    lemma1_bound,
    lemma5_dn_bound,
    theorem1_total_bound,
    theorem2_reduction_bound,
    theorem4_discretization_bound,
)
from .core import State, ToySystemParams, approx_manifold, toy_system, vector_norm
from .errors import DomainError, ExperimentError, MultiscaleError, SpecError
from .integrators import Scheme, SchemeConfig, integrate_multiscale, integrate_reduced

__all__ = [
    "ExperimentKind",
    "ExperimentSpec",
    "ExperimentResult",
    "PRESETS",
    "fig2_dt_macro_grid",
    "loglog_slope",
    "run_dt_scaling",
    "run_eps_scaling",
    "run_dn_scaling",
    "run_experiment",
    "bounds_table",
    "parse_spec",
    "format_spec",
    "write_csv",
]

# reduced-oracle step is this fraction of min(dt_macro, eps)
ORACLE_STEP_DIVISOR = 20
_FLOAT_FMT = ".17g"


class ExperimentKind(str, enum.Enum):
    DT_MACRO = "dt_macro_scaling"
    EPS = "eps_scaling"
    DN = "dn_scaling"


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep. ``sweep`` holds the swept ``dt_macro``, ``eps`` or initial ``x`` offsets."""

    kind: ExperimentKind
    toy: ToySystemParams
    sweep: tuple[float, ...]
    dt_micro: float
    num_micro: int
    y0: float
    eps: float | None = None
    dt_macro: float | None = None
    x0_offset: float = 0.0
    T_final: float | None = None
    n_steps: int | None = None
    ledger_preset: str = "fig2"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ExperimentKind(self.kind))
        object.__setattr__(self, "sweep", tuple(float(v) for v in self.sweep))
        sw = np.array(self.sweep)
        if sw.size < 4:
            raise SpecError("sweep needs at least 4 points")
        if np.any(np.diff(sw) <= 0) or not np.all(np.isfinite(sw)):
            raise SpecError("sweep must be finite and strictly increasing")
        if not self.dt_micro > 0:
            raise SpecError("dt_micro must be positive")
        if int(self.num_micro) != self.num_micro or self.num_micro < 0:
            raise SpecError("num_micro must be a nonnegative integer")
        if self.ledger_preset not in LEDGER_PRESETS:
            raise SpecError(f"unknown ledger preset {self.ledger_preset!r}")
        kind = self.kind
        swept_eps = kind is ExperimentKind.EPS
        swept_dt = kind is ExperimentKind.DT_MACRO
        if swept_eps == (self.eps is not None):
            raise SpecError("eps must be given unless it is the swept field")
        if swept_dt == (self.dt_macro is not None):
            raise SpecError("dt_macro must be given unless it is the swept field")
        if kind is ExperimentKind.DT_MACRO:
            if self.T_final is None or self.n_steps is not None:
                raise SpecError("dt_macro_scaling needs T_final (and no n_steps)")
        elif self.n_steps is None or self.T_final is not None:
            raise SpecError(f"{kind.value} needs n_steps (and no T_final)")
        if kind is not ExperimentKind.DN and np.any(sw <= 0):
            raise SpecError("swept step sizes must be positive")

    @property
    def swept_field(self) -> str:
        return {
            ExperimentKind.DT_MACRO: "dt_macro",
            ExperimentKind.EPS: "eps",
            ExperimentKind.DN: "x0_offset",
        }[self.kind]

    @property
    def ledger(self) -> ConstantsLedger:
        return LEDGER_PRESETS[self.ledger_preset]


@dataclass(eq=False)
class ExperimentResult:
    spec: ExperimentSpec
    sweep_values: np.ndarray
    x_values: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float
    residual: float
    rows: list[dict] = field(default_factory=list)
    reports: list[AssumptionReport] = field(default_factory=list)
    used: np.ndarray | None = None


def loglog_slope(xs, ys) -> tuple[float, float, float]:
    """Least-squares line through ``(log x, log y)``; returns slope, intercept, max residual."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 2:
        raise DomainError("need at least two (x, y) pairs of equal length")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise DomainError("log-log regression needs strictly positive data")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.max(np.abs(ly - (slope * lx + intercept))))
    return float(slope), float(intercept), residual


def fig2_dt_macro_grid(
    eps: float,
    dt_micro: float,
    num_micro: int,
    T: float = 1.0,
    n_range: tuple[int, int] = (48, 918),
    points: int = 10,
    max_burst_share: float = 1 / 11,
) -> tuple[float, ...]:
    """Macrostep grid for the fixed-horizon sweep.

    Step counts ``n`` are log-spaced over ``n_range`` and ``dt_macro = T/n - M dt``
    so that ``n t_delta = T`` exactly. ``n`` is capped so the burst takes at most
    ``max_burst_share`` of each PI period, which is not binding for small ``dt``.
    """
    burst = num_micro * dt_micro
    n_lo, n_hi = n_range
    if burst > 0:
        n_hi = min(n_hi, math.floor(T * max_burst_share / burst))
    if n_hi <= n_lo:
        raise SpecError("no admissible step counts for this microstep")
    ns = sorted({int(round(v)) for v in np.geomspace(n_lo, n_hi, points)}, reverse=True)
    grid = tuple(T / n - burst for n in ns)
    if len(grid) < 4:
        raise SpecError("fewer than 4 distinct step counts")
    return grid


def _fig2(dt_factor: float) -> ExperimentSpec:
    eps, M = 1e-5, 90
    return ExperimentSpec(
        kind=ExperimentKind.DT_MACRO,
        toy=ToySystemParams(a=1.0, b=0.1),
        sweep=fig2_dt_macro_grid(eps, dt_factor * eps, M),
        dt_micro=dt_factor * eps,
        num_micro=M,
        y0=1.0,
        eps=eps,
        T_final=1.0,
        ledger_preset="fig2",
        name=f"fig2 dt={dt_factor:g}eps",
    )


def _fig3() -> ExperimentSpec:
    return ExperimentSpec(
        kind=ExperimentKind.EPS,
        toy=ToySystemParams(a=0.1, b=1.0),
        sweep=tuple(np.geomspace(1e-4, 1e-3, 8)),
        dt_micro=1e-6,
        dt_macro=1e-4,
        num_micro=100,
        y0=5.0,
        n_steps=50,
        ledger_preset="fig3",
        name="fig3",
    )


def _fig4(dt_factor: float) -> ExperimentSpec:
    eps = 1e-4
    return ExperimentSpec(
        kind=ExperimentKind.DN,
        toy=ToySystemParams(a=1.0, b=1.0),
        sweep=tuple(np.geomspace(0.01, 0.5, 8)),
        dt_micro=dt_factor * eps,
        dt_macro=1e-3,
        num_micro=100,
        y0=1.0,
        eps=eps,
        n_steps=5,
        ledger_preset="fig4",
        name=f"fig4 dt={dt_factor:g}eps",
    )


PRESETS: dict[str, tuple[ExperimentSpec, ...]] = {
    "fig2": (_fig2(0.1), _fig2(1.6)),
    "fig3": (_fig3(),),
    "fig4": (_fig4(0.01), _fig4(1.99)),
}


@dataclass
class _Point:
    value: float
    eps: float
    cfg: SchemeConfig
    n: int
    x0_offset: float


def _points(spec: ExperimentSpec) -> list[_Point]:
    pts = []
    for v in spec.sweep:
        eps = v if spec.kind is ExperimentKind.EPS else spec.eps
        dt_macro = v if spec.kind is ExperimentKind.DT_MACRO else spec.dt_macro
        offset = v if spec.kind is ExperimentKind.DN else spec.x0_offset
        cfg = SchemeConfig(spec.dt_micro, dt_macro, spec.num_micro)
        if spec.kind is ExperimentKind.DT_MACRO:
            n = int(math.floor(spec.T_final / cfg.t_delta + 1e-9))
        else:
            n = spec.n_steps
        pts.append(_Point(v, eps, cfg, n, offset))
    return pts


def _initial_state(sys, spec: ExperimentSpec, offset: float) -> State:
    y0 = np.array([spec.y0])
    return State.of(sys, approx_manifold(sys, y0) + offset, y0)


def _reduced_finals(spec, sys, times, h):
    try:
        oracle = integrate_reduced(sys, [spec.y0], h, max(times), t_eval=times)
    except MultiscaleError as err:
        raise ExperimentError(f"{spec.name or spec.kind.value}: reduced oracle failed: {err}") from err
    lookup = dict(zip(oracle.times.tolist(), oracle.ys))
    return [lookup[t] for t in times]


def _run(spec: ExperimentSpec) -> ExperimentResult:
    ledger = spec.ledger
    pts = _points(spec)
    runs = []
    for p in pts:
        sys = toy_system(spec.toy, p.eps)
        s0 = _initial_state(sys, spec, p.x0_offset)
        if p.n < 1:
            raise ExperimentError(f"{spec.swept_field}={p.value!r}: horizon shorter than one step")
        traj = integrate_multiscale(sys, s0, p.cfg, Scheme.PI, n_steps=p.n)
        if traj.diverged:
            raise ExperimentError(f"{spec.swept_field}={p.value!r}: {traj.error}")
        d_i0 = [vector_norm(x - approx_manifold(sys, y)) for x, y in zip(traj.xs, traj.ys)]
        runs.append((sys, traj, d_i0))

    # the reduced system does not depend on eps, so one oracle serves all points
    t_finals = [float(traj.times[-1]) for _, traj, _ in runs]
    h = min(min(p.cfg.dt_macro, p.eps) for p in pts) / ORACLE_STEP_DIVISOR
    Y_finals = _reduced_finals(spec, runs[0][0], sorted(set(t_finals)), h)
    Y_at = dict(zip(sorted(set(t_finals)), Y_finals))

    rows, reports, errors, dns = [], [], [], []
    for p, (sys, traj, d_i0), t_fin in zip(pts, runs, t_finals):
        E_d = float(np.max(np.abs(traj.ys[-1] - Y_at[t_fin])))
        dn = float(max(d_i0[:-1]))
        report = check_assumptions(ledger, p.cfg, p.eps)
        try:
            bound = theorem4_discretization_bound(
                ledger.with_offsets(c0x=d_i0[0]), p.cfg, p.eps, p.n, dn
            )
        except DomainError:
            bound = math.nan
        rows.append(
            {
                "dt_micro": p.cfg.dt_micro,
                "dt_macro": p.cfg.dt_macro,
                "eps": p.eps,
                "x0_offset": p.x0_offset,
                "t_delta": p.cfg.t_delta,
                "n": p.n,
                "t_final": t_fin,
                "d0": d_i0[0],
                "d_n": dn,
                "E_d": E_d,
                "bound_E_d": bound,
            }
        )
        reports.append(report)
        errors.append(E_d)
        dns.append(dn)

    sweep = np.array(spec.sweep)
    errors = np.array(errors)
    xs = np.array(dns) if spec.kind is ExperimentKind.DN else sweep
    used = (xs > 0) & (errors > 0)
    if spec.kind is ExperimentKind.DN:
        used &= sweep != 0
    if used.sum() < 2:
        raise ExperimentError("fewer than two usable points for the regression")
    slope, intercept, residual = loglog_slope(xs[used], errors[used])
    return ExperimentResult(
        spec=spec,
        sweep_values=sweep,
        x_values=xs,
        errors=errors,
        slope=slope,
        intercept=intercept,
        residual=residual,
        rows=rows,
        reports=reports,
        used=used,
    )


def run_dt_scaling(spec: ExperimentSpec) -> ExperimentResult:
    """PI over a macrostep sweep at a fixed horizon; slope of ``E_d`` against ``dt_macro``."""
    if spec.kind is not ExperimentKind.DT_MACRO:
        raise SpecError("expected a dt_macro_scaling spec")
    return _run(spec)


def run_eps_scaling(spec: ExperimentSpec) -> ExperimentResult:
    """PI with fixed steps over an ``eps`` sweep; slope of ``E_d`` against ``eps``."""
    if spec.kind is not ExperimentKind.EPS:
        raise SpecError("expected an eps_scaling spec")
    return _run(spec)


def run_dn_scaling(spec: ExperimentSpec) -> ExperimentResult:
    """PI from off-manifold starts; slope of ``E_d`` against the measured ``|d^n|``.

    Zero offsets are run but left out of the regression.
    """
    if spec.kind is not ExperimentKind.DN:
        raise SpecError("expected a dn_scaling spec")
    return _run(spec)


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    return {
        ExperimentKind.DT_MACRO: run_dt_scaling,
        ExperimentKind.EPS: run_eps_scaling,
        ExperimentKind.DN: run_dn_scaling,
    }[spec.kind](spec)


def _nan_on_domain(fn, *args):
    try:
        return fn(*args)
    except DomainError:
        return math.nan


def bounds_table(result: ExperimentResult) -> list[dict]:
    """Per-point bound values next to the measured ``E_d`` and ``|d^n|``."""
    spec = result.spec
    out = []
    for row in result.rows:
        cfg = SchemeConfig(row["dt_micro"], row["dt_macro"], spec.num_micro)
        eps = row["eps"]
        ledger = spec.ledger.with_offsets(c0x=row["d0"])
        out.append(
            {
                "dt_micro": row["dt_micro"],
                spec.swept_field: row[spec.swept_field],
                "n": row["n"],
                "t_final": row["t_final"],
                "E_d": row["E_d"],
                "d_n": row["d_n"],
                "lemma1_M": _nan_on_domain(lemma1_bound, ledger, eps, cfg.dt_micro, cfg.num_micro, row["d0"]),
                "lemma5_dn": _nan_on_domain(lemma5_dn_bound, ledger, cfg, eps, row["d0"]),
                "theorem2": theorem2_reduction_bound(ledger, eps, row["t_final"]),
                "theorem4": _nan_on_domain(theorem4_discretization_bound, ledger, cfg, eps, row["n"], row["d_n"]),
                "theorem1": _nan_on_domain(theorem1_total_bound, ledger, cfg, eps, row["n"], row["d_n"]),
            }
        )
    return out


_SPEC_KEYS = {f.name for f in fields(ExperimentSpec)} - {"toy"} | {"a", "b", "x0_offsets"}
_INT_KEYS = {"num_micro", "n_steps"}
_STR_KEYS = {"kind", "ledger_preset", "name"}


def parse_spec(text: str) -> ExperimentSpec:
    """Parse ``key = value`` lines (``#`` starts a comment) into a spec.

    ``sweep`` (or ``x0_offsets``) is a comma-separated list of numbers.
    """
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _SPEC_KEYS:
            raise SpecError(f"line {lineno}: unknown key {key!r}")
        if key == "x0_offsets":
            key = "sweep"
        if key in values:
            raise SpecError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _STR_KEYS:
                values[key] = val
            elif key == "sweep":
                values[key] = tuple(float(v) for v in val.split(",") if v.strip())
            elif key in _INT_KEYS:
                values[key] = int(val)
            else:
                values[key] = float(val)
        except ValueError as err:
            raise SpecError(f"line {lineno}: bad value for {key!r}: {val!r}") from err
    try:
        a = values.pop("a")
        b = values.pop("b")
    except KeyError as err:
        raise SpecError(f"missing key {err.args[0]!r}") from None
    try:
        return ExperimentSpec(toy=ToySystemParams(a, b), **values)
    except TypeError as err:
        raise SpecError(f"incomplete spec: {err}") from None
    except ValueError as err:
        raise SpecError(str(err)) from None


def format_spec(spec: ExperimentSpec) -> str:
    lines = [f"kind = {spec.kind.value}", f"a = {spec.toy.a!r}", f"b = {spec.toy.b!r}"]
    for f in fields(spec):
        if f.name in ("kind", "toy"):
            continue
        v = getattr(spec, f.name)
        if v is None or (f.name == "name" and not v):
            continue
        if f.name == "sweep":
            v = ", ".join(repr(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), _FLOAT_FMT)


_CSV_COLUMNS = {
    ExperimentKind.DT_MACRO: ["dt_micro", "dt_macro", "t_delta", "n", "E_d", "bound_E_d", "t_final", "d_n"],
    ExperimentKind.EPS: ["dt_micro", "eps", "t_delta", "n", "E_d", "bound_E_d", "t_final", "d_n"],
    ExperimentKind.DN: ["dt_micro", "x0_offset", "d0", "d_n", "t_delta", "n", "E_d", "bound_E_d", "t_final"],
}


def write_csv(results: list[ExperimentResult], fh: io.TextIOBase, table: str = "run") -> None:
    """Write results of one or more series of the same kind as commented CSV.

    ``table="bounds"`` replaces the measurement columns with :func:`bounds_table`.
    """
    if not results:
        raise ValueError("no results to write")
    kinds = {r.spec.kind for r in results}
    if len(kinds) != 1:
        raise ValueError("all series must share one kind")
    for k, r in enumerate(results):
        fh.write(f"# series {k}: {r.spec.name or r.spec.kind.value}\n")
        for line in format_spec(r.spec).splitlines():
            fh.write(f"#   {line}\n")
        for v, rep in zip(r.sweep_values, r.reports):
            fh.write(f"#   assumptions[{r.spec.swept_field}={_fmt(v)}]: {rep.summary()}\n")
    if table == "bounds":
        tables = [bounds_table(r) for r in results]
        columns = list(tables[0][0].keys())
    else:
        tables = [r.rows for r in results]
        columns = _CSV_COLUMNS[results[0].spec.kind]
    fh.write(",".join(columns) + "\n")
    for rows in tables:
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")
    for k, r in enumerate(results):
        fh.write(
            f"# slope[series {k}] = {_fmt(r.slope)} intercept = {_fmt(r.intercept)}"
            f" residual = {_fmt(r.residual)} points = {int(r.used.sum())}\n"
        )
