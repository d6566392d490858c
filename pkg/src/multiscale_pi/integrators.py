"""Multiscale time steppers and reference oracles.

All micro- and macrosolvers are forward Euler. Projective integration (PI)
runs ``M`` coupled microsteps and extrapolates both variables from the last
one; seamless HMM uses the same burst to form a weighted vector-field
estimate applied from the start of the burst; classic HMM relaxes ``x`` with
``y`` frozen.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import MultiscaleSystem, State, eval_reduced_rhs
from .errors import AccuracyError, ContractError, DivergenceError, StepOverflowError

__all__ = [
    "Scheme",
    "SchemeConfig",
    "WeightVector",
    "MicroBurst",
    "Trajectory",
    "micro_step",
    "micro_burst",
    "pi_macro_step",
    "pi_macro_step_weighted",
    "pi_weights",
    "hmm_endpoint_weights",
    "shmm_macro_step",
    "hmm_macro_step",
    "frozen_burst",
    "integrate_multiscale",
    "integrate_reference",
    "integrate_reduced",
]

WEIGHT_SUM_TOL = 1e-15
REFERENCE_RTOL = 1e-9
REDUCED_RTOL = 1e-10
# slack when counting how many whole steps fit into a horizon
_HORIZON_SLACK = 1e-9


class Scheme(str, enum.Enum):
    REFERENCE = "reference"
    REDUCED = "reduced"
    PI = "PI"
    SEAMLESS_HMM = "seamlessHMM"
    HMM = "HMM"


@dataclass(frozen=True)
class SchemeConfig:
    """Microstep ``dt_micro``, macrostep ``dt_macro`` and burst length ``num_micro``.

    Assumption checks against ``eps`` live in :mod:`multiscale_pi.analysis`;
    nothing here forbids configurations that violate them.
    """

    dt_micro: float
    dt_macro: float
    num_micro: int

    def __post_init__(self):
        if not (self.dt_micro > 0 and math.isfinite(self.dt_micro)):
            raise ContractError(f"dt_micro must be positive, got {self.dt_micro}")
        if not (self.dt_macro > 0 and math.isfinite(self.dt_macro)):
            raise ContractError(f"dt_macro must be positive, got {self.dt_macro}")
        if int(self.num_micro) != self.num_micro or self.num_micro < 0:
            raise ContractError(f"num_micro must be a nonnegative integer, got {self.num_micro}")
        object.__setattr__(self, "num_micro", int(self.num_micro))

    @property
    def t_delta(self) -> float:
        """Time between two PI macrosteps, ``dt_macro + num_micro * dt_micro``."""
        return self.dt_macro + self.num_micro * self.dt_micro

    def dt_star(self, eps: float, lam: float = 1.0) -> float:
        """Mirrored microstep ``2 eps - lam dt_micro``."""
        return 2.0 * eps - lam * self.dt_micro


@dataclass(frozen=True, eq=False)
class WeightVector:
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        if w.size == 0 or not np.all(np.isfinite(w)):
            raise ContractError("weights must be a nonempty finite vector")
        total = math.fsum(w)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ContractError(f"weights must sum to 1, got {total!r}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __len__(self):
        return self.w.size


@dataclass(frozen=True, eq=False)
class MicroBurst:
    """The ``M + 1`` states ``(x^{n,m}, y^{n,m})`` of one burst, row per microstep."""

    xs: np.ndarray
    ys: np.ndarray
    ts: np.ndarray

    def __len__(self):
        return self.ts.size

    def state(self, m: int) -> State:
        return State(self.xs[m], self.ys[m], float(self.ts[m]))

    @property
    def states(self) -> list[State]:
        return [self.state(m) for m in range(len(self))]


@dataclass(eq=False)
class Trajectory:
    """Time-stamped states produced by an integrator.

    Reduced runs have ``xs = None`` and store ``Y`` in ``ys``. ``error`` is set
    when the run stopped early on a non-finite state.
    """

    times: np.ndarray
    ys: np.ndarray
    xs: np.ndarray | None
    scheme: Scheme
    config: SchemeConfig | float
    bursts: list[MicroBurst] | None = None
    error: str | None = None
    check_residual: float | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size

    def state(self, i: int) -> State:
        x = self.xs[i] if self.xs is not None else np.empty(0)
        return State(x, self.ys[i], float(self.times[i]))

    @property
    def states(self) -> list[State]:
        return [self.state(i) for i in range(len(self))]

    @property
    def final(self) -> State:
        return self.state(len(self) - 1)

    @property
    def diverged(self) -> bool:
        return self.error is not None


def _finite(v: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(v)))


def micro_step(sys: MultiscaleSystem, s: State, dt_micro: float) -> State:
    """One coupled forward Euler microstep; both updates read the incoming state."""
    if not dt_micro > 0:
        raise ContractError("dt_micro must be positive")
    x, y = s.x, s.y
    with np.errstate(all="ignore"):
        x_new = x - (dt_micro / sys.epsilon) * (sys.lambda_diag * x - sys.f(y))
        y_new = y + dt_micro * np.asarray(sys.g(x, y), dtype=float)
    for name, v in (("x", x_new), ("y", y_new)):
        if not _finite(v):
            raise StepOverflowError(
                f"microstep produced non-finite {name} at t={s.t!r}", state=s, component=name
            )
    return State(x_new, y_new, s.t + dt_micro)


def micro_burst(sys: MultiscaleSystem, s: State, cfg: SchemeConfig) -> MicroBurst:
    M = cfg.num_micro
    xs = np.empty((M + 1, sys.fast_dim))
    ys = np.empty((M + 1, sys.slow_dim))
    ts = np.empty(M + 1)
    xs[0], ys[0], ts[0] = s.x, s.y, s.t
    cur = s
    for m in range(M):
        try:
            cur = micro_step(sys, cur, cfg.dt_micro)
        except StepOverflowError as err:
            err.index = m
            raise
        xs[m + 1], ys[m + 1], ts[m + 1] = cur.x, cur.y, cur.t
    return MicroBurst(xs, ys, ts)


def _checked(x: np.ndarray, y: np.ndarray, t: float, last: State) -> State:
    for name, v in (("x", x), ("y", y)):
        if not _finite(v):
            raise DivergenceError(
                f"macrostep produced non-finite {name} after t={last.t!r}",
                state=last,
                component=name,
            )
    return State(x, y, t)


def _pi_update(sys, s, cfg, burst):
    xM, yM = burst.xs[-1], burst.ys[-1]
    with np.errstate(all="ignore"):
        x_new = xM - (cfg.dt_macro / sys.epsilon) * (sys.lambda_diag * xM - sys.f(yM))
        y_new = yM + cfg.dt_macro * np.asarray(sys.g(xM, yM), dtype=float)
    return _checked(x_new, y_new, s.t + cfg.t_delta, burst.state(-1))


def pi_macro_step(sys: MultiscaleSystem, s: State, cfg: SchemeConfig) -> State:
    """PI step: burst, then an Euler step of size ``dt_macro`` from its last state."""
    return _pi_update(sys, s, cfg, micro_burst(sys, s, cfg))


def pi_weights(cfg: SchemeConfig) -> WeightVector:
    """``dt_micro / t_delta`` on the first ``M`` samples, ``dt_macro / t_delta`` on the last."""
    td = cfg.t_delta
    w = np.full(cfg.num_micro + 1, cfg.dt_micro / td)
    w[-1] = cfg.dt_macro / td
    return WeightVector(w)


def hmm_endpoint_weights(M: int) -> WeightVector:
    if M < 0:
        raise ContractError("M must be nonnegative")
    w = np.zeros(M + 1)
    w[-1] = 1.0
    return WeightVector(w)


def _check_weights(w: WeightVector, cfg: SchemeConfig):
    if len(w) != cfg.num_micro + 1:
        raise ContractError(f"expected {cfg.num_micro + 1} weights, got {len(w)}")


def _weighted_update(sys, s, burst, step, w):
    # x' = x^n - (step/eps) sum_m W_m (Lambda x^{n,m} - f(y^{n,m})),  y' = y^n + step * g~
    W = w.w[:, None]
    with np.errstate(all="ignore"):
        fast = np.array([sys.f(yy) for yy in burst.ys], dtype=float).reshape(burst.xs.shape)
        slow = np.array(
            [sys.g(xx, yy) for xx, yy in zip(burst.xs, burst.ys)], dtype=float
        ).reshape(burst.ys.shape)
        residual = np.sum(W * (sys.lambda_diag * burst.xs - fast), axis=0)
        g_tilde = np.sum(W * slow, axis=0)
        x_new = s.x - (step / sys.epsilon) * residual
        y_new = s.y + step * g_tilde
    return _checked(x_new, y_new, s.t + step, burst.state(-1))


def pi_macro_step_weighted(sys: MultiscaleSystem, s: State, cfg: SchemeConfig) -> State:
    """PI written as a seamless-HMM step of size ``t_delta`` with :func:`pi_weights`."""
    return _weighted_update(sys, s, micro_burst(sys, s, cfg), cfg.t_delta, pi_weights(cfg))


def shmm_macro_step(sys: MultiscaleSystem, s: State, cfg: SchemeConfig, w: WeightVector) -> State:
    """Seamless HMM step. The burst only feeds the estimator, so time advances by ``dt_macro``."""
    _check_weights(w, cfg)
    return _weighted_update(sys, s, micro_burst(sys, s, cfg), cfg.dt_macro, w)


def frozen_burst(sys: MultiscaleSystem, s: State, cfg: SchemeConfig) -> MicroBurst:
    """HMM microsolver: relax ``x`` towards ``Lambda^{-1} f(y^n)`` with ``y`` held at ``y^n``."""
    M = cfg.num_micro
    ratio = cfg.dt_micro / sys.epsilon
    fy = np.asarray(sys.f(s.y), dtype=float)
    xs = np.empty((M + 1, sys.fast_dim))
    xs[0] = x = s.x
    with np.errstate(all="ignore"):
        for m in range(M):
            x = x - ratio * (sys.lambda_diag * x - fy)
            if not _finite(x):
                raise StepOverflowError(
                    f"frozen microstep produced non-finite x at m={m}",
                    state=s, component="x", index=m,
                )
            xs[m + 1] = x
    ys = np.broadcast_to(s.y, (M + 1, sys.slow_dim)).copy()
    return MicroBurst(xs, ys, s.t + cfg.dt_micro * np.arange(M + 1))


def _hmm_update(sys, s, cfg, burst, w):
    with np.errstate(all="ignore"):
        g_hat = np.zeros(sys.slow_dim)
        for m in np.flatnonzero(w.w):
            g_hat = g_hat + w.w[m] * np.asarray(sys.g(burst.xs[m], s.y), dtype=float)
        y_new = s.y + cfg.dt_macro * g_hat
    return _checked(burst.xs[-1].copy(), y_new, s.t + cfg.dt_macro, s)


def hmm_macro_step(sys: MultiscaleSystem, s: State, cfg: SchemeConfig, w: WeightVector) -> State:
    """HMM step: frozen-slow burst, then ``y' = y^n + dt_macro * sum_m W_m g(x^{n,m}, y^n)``."""
    _check_weights(w, cfg)
    return _hmm_update(sys, s, cfg, frozen_burst(sys, s, cfg), w)


def _horizon_count(T: float, step: float) -> int:
    return int(math.floor(T / step + _HORIZON_SLACK))


def integrate_multiscale(
    sys: MultiscaleSystem,
    s0: State,
    cfg: SchemeConfig,
    scheme: Scheme | str,
    T: float | None = None,
    *,
    weights: WeightVector | None = None,
    n_steps: int | None = None,
    keep_micro: bool = False,
) -> Trajectory:
    """Iterate a macrostep from ``s0`` for ``n_steps`` steps or up to horizon ``T``.

    Timestamps are set to ``s0.t + k * step`` (``step`` is ``t_delta`` for PI and
    ``dt_macro`` otherwise). On divergence the trajectory is truncated at the
    last finite macro state and ``error`` is set.
    """
    scheme = Scheme(scheme)
    if scheme is Scheme.PI:
        step = cfg.t_delta
    elif scheme in (Scheme.SEAMLESS_HMM, Scheme.HMM):
        if weights is None:
            raise ContractError(f"{scheme.value} requires weights")
        _check_weights(weights, cfg)
        step = cfg.dt_macro
    else:
        raise ContractError(f"not a multiscale scheme: {scheme.value}")
    if (T is None) == (n_steps is None):
        raise ContractError("give exactly one of T and n_steps")
    if n_steps is None:
        if not T > 0:
            raise ContractError("T must be positive")
        n_steps = _horizon_count(T, step)
    if n_steps < 0:
        raise ContractError("n_steps must be nonnegative")

    times = [s0.t]
    xs = [s0.x]
    ys = [s0.y]
    bursts: list[MicroBurst] | None = [] if keep_micro else None
    error = None
    cur = s0
    for k in range(n_steps):
        try:
            if scheme is Scheme.HMM:
                burst = frozen_burst(sys, cur, cfg)
                nxt = _hmm_update(sys, cur, cfg, burst, weights)
            else:
                burst = micro_burst(sys, cur, cfg)
                if scheme is Scheme.PI:
                    nxt = _pi_update(sys, cur, cfg, burst)
                else:
                    nxt = _weighted_update(sys, cur, burst, cfg.dt_macro, weights)
        except DivergenceError as err:
            err.index = k if err.index is None else err.index
            error = f"diverged at macrostep {k}: {err}"
            break
        if keep_micro:
            bursts.append(burst)
        cur = State(nxt.x, nxt.y, s0.t + (k + 1) * step)
        times.append(cur.t)
        xs.append(cur.x)
        ys.append(cur.y)
    return Trajectory(
        times=np.array(times),
        ys=np.array(ys),
        xs=np.array(xs),
        scheme=scheme,
        config=cfg,
        bursts=bursts,
        error=error,
    )


def _output_times(t0: float, T: float, t_eval) -> np.ndarray:
    if t_eval is None:
        return np.array([t0, t0 + T])
    pts = np.asarray(t_eval, dtype=float).ravel()
    if np.any(pts < t0) or np.any(pts > t0 + T * (1 + 1e-15)):
        raise ContractError("t_eval must lie inside [t0, t0 + T]")
    return np.unique(np.concatenate([[t0], pts, [t0 + T]]))


def _segment_counts(times: np.ndarray, h: float) -> list[int]:
    return [max(1, math.ceil((b - a) / h * (1 - 1e-12))) for a, b in zip(times[:-1], times[1:])]


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    diff = float(np.max(np.abs(a - b)))
    if diff == 0.0:
        return 0.0
    scale = float(np.max(np.abs(b)))
    return diff / scale if scale > 0 else math.inf


def _reference_pass(sys, s0, times, counts, refine):
    kernel = _kernels.rk4_full if sys.jitted else _kernels.py_rk4_full
    x, y = s0.x.copy(), s0.y.copy()
    xs, ys = [x], [y]
    for (a, b), N in zip(zip(times[:-1], times[1:]), counts):
        N *= refine
        x, y = kernel(sys.f, sys.g, sys.lambda_diag, sys.epsilon, x, y, (b - a) / N, N)
        xs.append(x)
        ys.append(y)
    return np.array(xs), np.array(ys)


def integrate_reference(
    sys: MultiscaleSystem,
    s0: State,
    h_ref: float | None,
    T: float,
    *,
    t_eval=None,
    check: bool = True,
) -> Trajectory:
    """Classical RK4 on the full system at a fixed step no larger than ``h_ref``.

    ``h_ref`` defaults to ``eps / 20`` and may not exceed it. Output lands
    exactly on ``t_eval`` (each segment uses the largest step ``<= h_ref`` that
    divides it). With ``check`` the run is repeated at half the step and the
    slow variables at ``T`` must agree to ``1e-9`` relative.
    """
    eps = sys.epsilon
    if h_ref is None:
        h_ref = eps / 20.0
    if not h_ref > 0:
        raise ContractError("h_ref must be positive")
    if h_ref > eps / 20.0 * (1 + 1e-12):
        raise ContractError(f"h_ref={h_ref!r} exceeds eps/20={eps / 20.0!r}")
    if not T > 0:
        raise ContractError("T must be positive")
    times = _output_times(s0.t, T, t_eval)
    counts = _segment_counts(times, h_ref)
    with np.errstate(all="ignore"):
        xs, ys = _reference_pass(sys, s0, times, counts, 1)
    if not (_finite(xs) and _finite(ys)):
        raise DivergenceError("reference integration produced non-finite values", state=s0)
    residual = None
    if check:
        with np.errstate(all="ignore"):
            _, ys_half = _reference_pass(sys, s0, times, counts, 2)
        residual = _relative_gap(ys[-1], ys_half[-1])
        if not residual <= REFERENCE_RTOL:
            raise AccuracyError(
                f"step-halving check failed: relative change {residual:.3e} > {REFERENCE_RTOL:g};"
                f" use a smaller h_ref than {h_ref!r}"
            )
    return Trajectory(
        times=times, ys=ys, xs=xs, scheme=Scheme.REFERENCE, config=float(h_ref),
        check_residual=residual,
    )


def _reduced_pass(sys, Y0, times, counts, refine):
    kernel = _kernels.rk4_reduced if sys.jitted else _kernels.py_rk4_reduced
    Y = Y0.copy()
    out = [Y]
    for (a, b), N in zip(zip(times[:-1], times[1:]), counts):
        N *= refine
        Y = kernel(sys.f, sys.g, sys.lambda_diag, Y, (b - a) / N, N)
        out.append(Y)
    return np.array(out)


def integrate_reduced(
    sys: MultiscaleSystem,
    Y0,
    h: float,
    T: float,
    order: str = "ref4",
    *,
    t0: float = 0.0,
    t_eval=None,
    check: bool = True,
) -> Trajectory:
    """Integrate ``dY/dt = G(Y)``.

    ``order="euler1"`` is the plain Euler recursion ``phi^m = phi^{m-1} + h G(phi^{m-1})``
    for ``floor(T/h)`` steps. ``order="ref4"`` is RK4 landing on ``t_eval``,
    checked by step halving to ``1e-10`` relative at ``T``.
    """
    Y0 = np.asarray(Y0, dtype=float).reshape(-1)
    if Y0.shape != (sys.slow_dim,):
        raise ContractError(f"Y0 must have shape ({sys.slow_dim},)")
    if not h > 0:
        raise ContractError("h must be positive")
    if not T > 0:
        raise ContractError("T must be positive")
    if order == "euler1":
        N = _horizon_count(T, h)
        phis = [Y0.copy()]
        phi = Y0.copy()
        with np.errstate(all="ignore"):
            for _ in range(N):
                phi = phi + h * eval_reduced_rhs(sys, phi)
                phis.append(phi)
        ys = np.array(phis)
        if not _finite(ys):
            raise DivergenceError("reduced Euler produced non-finite values")
        return Trajectory(
            times=t0 + h * np.arange(N + 1), ys=ys, xs=None, scheme=Scheme.REDUCED, config=float(h),
        )
    if order != "ref4":
        raise ContractError(f"unknown order {order!r}")
    times = _output_times(t0, T, t_eval)
    counts = _segment_counts(times, h)
    with np.errstate(all="ignore"):
        ys = _reduced_pass(sys, Y0, times, counts, 1)
    if not _finite(ys):
        raise DivergenceError("reduced reference integration produced non-finite values")
    residual = None
    if check:
        with np.errstate(all="ignore"):
            ys_half = _reduced_pass(sys, Y0, times, counts, 2)
        residual = _relative_gap(ys[-1], ys_half[-1])
        if not residual <= REDUCED_RTOL:
            raise AccuracyError(
                f"step-halving check failed: relative change {residual:.3e} > {REDUCED_RTOL:g};"
                f" use a smaller step than {h!r}"
            )
    return Trajectory(
        times=times, ys=ys, xs=None, scheme=Scheme.REDUCED, config=float(h), check_residual=residual,
    )
