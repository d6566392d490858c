"""Assumption checks, a priori bounds for PI and realised-error measurement.

Every comparison uses the infinity norm. For a diagonal ``Lambda`` the
operator norm of ``I - (dt/eps) Lambda`` in that norm is
``max(1 - dt/eps, lambda dt/eps - 1)``, which is where the two branches of the
bounds come from:

* small branch, ``0 < dt <= 2 eps / (lambda + 1)``: contraction ``1 - dt/eps``;
* large branch, ``2 eps / (lambda + 1) < dt < 2 eps / lambda``: contraction
  ``1 - dt*/eps`` with ``dt* = 2 eps - lambda dt``, and the drift terms pick up
  a factor ``dt / dt*``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import MultiscaleSystem, approx_manifold, vector_norm
from .errors import BoundInapplicableError, ContractError, DomainError
from .integrators import SchemeConfig, Trajectory

__all__ = [
    "ConstantsLedger",
    "LEDGER_PRESETS",
    "Branch",
    "AssumptionReport",
    "ErrorSeries",
    "classify_branch",
    "check_assumptions",
    "lemma1_bound",
    "lemma5_dn_bound",
    "theorem2_reduction_bound",
    "theorem4_discretization_bound",
    "theorem1_total_bound",
    "measure_errors",
    "estimate_constants",
]

_CONSTANT_SLACK = 1e-12


@dataclass(frozen=True)
class ConstantsLedger:
    """Lipschitz and sup-norm constants feeding the bounds.

    ``L_G`` and ``C_G`` default to ``L_g (1 + L_f)`` and ``C_g``. ``c0x`` is the
    initial distance from the approximate manifold and ``c0y`` the initial slow
    offset divided by ``eps``.
    """

    L_f: float
    L_g: float
    C_f: float
    C_g: float
    C_star: float
    lambda_max: float = 1.0
    L_G: float | None = None
    C_G: float | None = None
    c0x: float = 0.0
    c0y: float = 0.0

    def __post_init__(self):
        for name in ("L_f", "L_g", "C_f", "C_g", "C_star", "c0x", "c0y"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ContractError(f"{name} must be a finite nonnegative number, got {v}")
        if not self.lambda_max >= 1:
            raise ContractError("lambda_max must be at least 1")
        L_G_max = self.L_g * (1 + self.L_f)
        if self.L_G is None:
            object.__setattr__(self, "L_G", L_G_max)
        elif not 0 <= self.L_G <= L_G_max + _CONSTANT_SLACK:
            raise ContractError(f"L_G={self.L_G} exceeds L_g (1 + L_f) = {L_G_max}")
        if self.C_G is None:
            object.__setattr__(self, "C_G", self.C_g)
        elif not 0 <= self.C_G <= self.C_g + _CONSTANT_SLACK:
            raise ContractError(f"C_G={self.C_G} exceeds C_g = {self.C_g}")

    def with_offsets(self, c0x: float = 0.0, c0y: float = 0.0) -> "ConstantsLedger":
        return replace(self, c0x=c0x, c0y=c0y)


# values quoted with the three toy-system experiments; lambda = 1 throughout
LEDGER_PRESETS: dict[str, ConstantsLedger] = {
    "fig2": ConstantsLedger(L_f=0.2, L_g=2.0, C_f=1.0, C_g=1.0, C_star=2.0),
    "fig3": ConstantsLedger(L_f=1.0, L_g=2.0, C_f=1.0, C_g=7.0, C_star=6.0),
    "fig4": ConstantsLedger(L_f=1.0, L_g=1.0, C_f=1.0, C_g=290.0, C_star=6.0),
}


class Branch(str, enum.Enum):
    SMALL_DT = "small_dt"
    LARGE_DT = "large_dt"


def _flag(ok: bool) -> str:
    return "true" if ok else "false"


@dataclass(frozen=True)
class AssumptionReport:
    a6_ok: bool
    a7_ok: bool
    a8_ok: bool
    branch: Branch
    dt_star: float
    details: dict[str, str] = field(default_factory=dict)

    @property
    def branch_valid(self) -> bool:
        return self.branch is Branch.SMALL_DT or self.dt_star > 0

    def summary(self) -> str:
        return (
            f"a6_ok={_flag(self.a6_ok)} a7_ok={_flag(self.a7_ok)} a8_ok={_flag(self.a8_ok)} "
            f"branch={self.branch.value} dt_star={self.dt_star:.17g}"
        )


def classify_branch(dt_micro: float, eps: float, lam: float) -> Branch:
    # the branches coincide on the boundary; the small one wins the tie
    return Branch.SMALL_DT if dt_micro <= 2 * eps / (lam + 1) else Branch.LARGE_DT


def _branch_params(dt_micro: float, eps: float, lam: float):
    """Return ``(branch, contraction step, drift factor)``, raising outside ``(0, 2 eps/lam)``."""
    if not 0 < dt_micro < 2 * eps / lam:
        raise DomainError(
            f"dt_micro={dt_micro!r} outside (0, 2 eps/lambda) = (0, {2 * eps / lam!r})"
        )
    branch = classify_branch(dt_micro, eps, lam)
    if branch is Branch.SMALL_DT:
        return branch, dt_micro, 1.0
    dt_star = 2 * eps - lam * dt_micro
    return branch, dt_star, dt_micro / dt_star


def check_assumptions(c: ConstantsLedger, cfg: SchemeConfig, eps: float) -> AssumptionReport:
    if not eps > 0:
        raise ContractError("eps must be positive")
    lam = c.lambda_max
    dt, DT, M = cfg.dt_micro, cfg.dt_macro, cfg.num_micro
    details = {}

    a6 = 0 < dt <= 2 * eps / lam < DT
    details["A6"] = f"0 < dt={dt:.6g} <= 2eps/lambda={2 * eps / lam:.6g} < DT={DT:.6g}: {a6}"

    lhs7 = c.L_g * (1 + c.L_f) * M * dt
    a7 = c.L_G * M * dt <= lhs7 <= 1
    details["A7"] = f"L_g(1+L_f) M dt = {lhs7:.6g} <= 1: {a7}"

    branch = classify_branch(dt, eps, lam)
    dt_star = 2 * eps - lam * dt
    if branch is Branch.SMALL_DT:
        rate = dt
    else:
        rate = dt_star
        if dt_star <= 0:
            details["branch"] = f"dt_star={dt_star:.6g} <= 0: dt >= 2eps/lambda, branch invalid"
    if branch is Branch.LARGE_DT and dt_star <= 0:
        a8 = False
        details["A8"] = "not applicable: dt outside (0, 2eps/lambda)"
    else:
        lhs8 = DT * math.exp(-M * rate / eps)
        a8 = lhs8 < eps / lam
        which = "dt" if branch is Branch.SMALL_DT else "dt_star"
        details["A8"] = f"DT exp(-M {which}/eps) = {lhs8:.6g} < eps/lambda = {eps / lam:.6g}: {a8}"
    return AssumptionReport(a6, a7, a8, branch, dt_star, details)


def lemma1_bound(c: ConstantsLedger, eps: float, dt_micro: float, m: int, d0: float) -> float:
    """Distance from the approximate manifold after ``m`` microsteps of one burst."""
    if m < 0 or d0 < 0:
        raise ContractError("m and d0 must be nonnegative")
    _, rate, drift = _branch_params(dt_micro, eps, c.lambda_max)
    return (1 - rate / eps) ** m * d0 + drift * eps * c.L_f * c.C_g


def lemma5_dn_bound(c: ConstantsLedger, cfg: SchemeConfig, eps: float, d00: float) -> float:
    """Uniform bound on ``max_i |d^{i,0}|`` over all macrosteps."""
    lam = c.lambda_max
    branch, rate, drift = _branch_params(cfg.dt_micro, eps, lam)
    DT, M = cfg.dt_macro, cfg.num_micro
    denom = eps - DT * lam * math.exp(-M * rate / eps)
    if not denom > 0:
        raise BoundInapplicableError(
            f"denominator eps - DT lambda exp(-M dt/eps) = {denom:.6g} <= 0 (A8 violated)"
        )
    growth = 1 + lam if branch is Branch.SMALL_DT else 1 + lam * drift
    return d00 + eps * c.L_f * c.C_g * growth * DT / denom


def theorem2_reduction_bound(c: ConstantsLedger, eps: float, t: float) -> float:
    """Reduction error bound ``C1 eps`` for ``|y_eps(t) - Y(t)|``."""
    if t < 0:
        raise ContractError("t must be nonnegative")
    C1 = max(c.c0y * eps, c.L_f * c.L_g * c.C_g * t, c.L_g * c.c0x) * math.exp(
        c.L_g * (1 + c.L_f) * t
    )
    return C1 * eps


def theorem4_discretization_bound(
    c: ConstantsLedger, cfg: SchemeConfig, eps: float, n: int, dn: float
) -> float:
    """Explicit-constant bound on ``|y^n - Y(t^n)|`` given the running manifold distance ``dn``."""
    if n < 0 or dn < 0:
        raise ContractError("n and dn must be nonnegative")
    if not c.L_G > 0:
        raise DomainError("L_G must be positive")
    _, rate, drift = _branch_params(cfg.dt_micro, eps, c.lambda_max)
    td = cfg.t_delta
    horizon = n * td * c.L_G
    if not math.isfinite(horizon):
        raise DomainError("n * t_delta must be finite")
    bracket = (
        c.C_star * td
        + c.L_g * (eps / td + c.L_g * (1 + c.L_f) * eps + math.exp(-cfg.num_micro * rate / eps)) * dn
        + c.L_g * c.L_f * c.C_g * eps
    )
    return 3 * math.exp(horizon) / c.L_G * drift * bracket


def theorem1_total_bound(
    c: ConstantsLedger, cfg: SchemeConfig, eps: float, n: int, dn: float
) -> float:
    return theorem2_reduction_bound(c, eps, n * cfg.t_delta) + theorem4_discretization_bound(
        c, cfg, eps, n, dn
    )


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    times: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.times.shape != self.values.shape:
            raise ContractError("times and values must have equal lengths")

    @property
    def final(self) -> float:
        return float(self.values[-1])


def _match(oracle: Trajectory, times: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(oracle.times, times)
    out = np.empty(times.size, dtype=int)
    for k, (t, i) in enumerate(zip(times, idx)):
        tol = 1e-12 * max(1.0, abs(t))
        best = None
        for j in (i - 1, i):
            if 0 <= j < oracle.times.size and abs(oracle.times[j] - t) <= tol:
                best = j
        if best is None:
            raise ContractError(f"oracle has no state at t={t!r}")
        out[k] = best
    return out


def measure_errors(
    traj: Trajectory,
    sys: MultiscaleSystem,
    oracle_full: Trajectory | None = None,
    oracle_reduced: Trajectory | None = None,
) -> dict[str, ErrorSeries]:
    """Realised error series of a multiscale trajectory, infinity norm on slow components.

    ``E_total`` needs ``oracle_full``, ``E_d`` needs ``oracle_reduced`` and
    ``E_c`` needs both. ``d_nm`` covers every recorded microstate (or only the
    macro states if bursts were not kept); ``d_n`` is the running maximum
    ``max_{i<n} |d^{i,0}|`` reported at ``t^n`` for ``n >= 1``.
    """
    times = traj.times
    out: dict[str, ErrorSeries] = {}

    def slow_gap(a, b):
        return np.max(np.abs(a - b), axis=1)

    if oracle_full is not None:
        yf = oracle_full.ys[_match(oracle_full, times)]
        out["E_total"] = ErrorSeries(times, slow_gap(yf, traj.ys), "E_total")
    if oracle_reduced is not None:
        Yr = oracle_reduced.ys[_match(oracle_reduced, times)]
        out["E_d"] = ErrorSeries(times, slow_gap(traj.ys, Yr), "E_d")
        if oracle_full is not None:
            out["E_c"] = ErrorSeries(times, slow_gap(yf, Yr), "E_c")

    d0 = np.array([vector_norm(x - approx_manifold(sys, y)) for x, y in zip(traj.xs, traj.ys)])
    if traj.bursts:
        t_nm = np.concatenate([b.ts for b in traj.bursts])
        d_nm = np.concatenate(
            [
                [vector_norm(x - approx_manifold(sys, y)) for x, y in zip(b.xs, b.ys)]
                for b in traj.bursts
            ]
        )
        out["d_nm"] = ErrorSeries(t_nm, d_nm, "d_nm")
    else:
        out["d_nm"] = ErrorSeries(times.copy(), d0, "d_nm")
    out["d_n"] = ErrorSeries(times[1:].copy(), np.maximum.accumulate(d0)[:-1], "d_n")
    return out


def _jacobian(fun, z: np.ndarray, rel: float = 1e-6) -> np.ndarray:
    f0 = np.atleast_1d(np.asarray(fun(z), dtype=float))
    J = np.empty((f0.size, z.size))
    for j in range(z.size):
        h = rel * max(1.0, abs(z[j]))
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        J[:, j] = (np.asarray(fun(zp), dtype=float) - np.asarray(fun(zm), dtype=float)) / (2 * h)
    return J


def _opnorm(J: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(J), axis=1))) if J.size else 0.0


def estimate_constants(
    sys: MultiscaleSystem,
    x_box: tuple,
    y_box: tuple,
    samples: int = 2000,
    seed: int = 0,
) -> ConstantsLedger:
    """Sample the constants over a box with central finite differences.

    ``x_box`` and ``y_box`` are ``(lo, hi)`` pairs of scalars or vectors. The
    result is an estimate, not a certified bound; ``C_star`` is taken as the
    supremum of ``|DG(Y) G(Y)|`` on the slow box.
    """
    rng = np.random.default_rng(seed)
    xlo, xhi = (np.broadcast_to(np.asarray(v, dtype=float), (sys.fast_dim,)) for v in x_box)
    ylo, yhi = (np.broadcast_to(np.asarray(v, dtype=float), (sys.slow_dim,)) for v in y_box)
    L_f = L_g = C_f = C_g = C_star = 0.0

    def G(Y):
        return np.asarray(sys.g(approx_manifold(sys, Y), Y), dtype=float)

    for _ in range(samples):
        x = xlo + (xhi - xlo) * rng.random(sys.fast_dim)
        y = ylo + (yhi - ylo) * rng.random(sys.slow_dim)
        C_f = max(C_f, vector_norm(sys.f(y)))
        C_g = max(C_g, vector_norm(sys.g(x, y)))
        L_f = max(L_f, _opnorm(_jacobian(sys.f, y)))
        Jx = _jacobian(lambda u: sys.g(u, y), x)
        Jy = _jacobian(lambda v: sys.g(x, v), y)
        L_g = max(L_g, _opnorm(Jx), _opnorm(Jy))
        C_star = max(C_star, vector_norm(_jacobian(G, y) @ G(y)))
    return ConstantsLedger(
        L_f=L_f, L_g=L_g, C_f=C_f, C_g=C_g, C_star=C_star, lambda_max=sys.lambda_max
    )
