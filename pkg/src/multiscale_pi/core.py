"""Slow-fast model class, approximate centre manifold and the reference toy system.

The systems handled here have the form::

    dy/dt = g(x, y)
    dx/dt = (-Lambda x + f(y)) / eps

with ``Lambda`` diagonal and positive, normalised so that its smallest entry
is one. The centre manifold is approximated at lowest order by
``x = Lambda^{-1} f(y)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numba import njit
from numba.core.dispatcher import Dispatcher

from .errors import ContractError

__all__ = [
    "MultiscaleSystem",
    "State",
    "ToySystemParams",
    "toy_system",
    "eval_slow_rhs",
    "eval_fast_rhs",
    "approx_manifold",
    "manifold_distance",
    "eval_reduced_rhs",
    "vector_norm",
]

_LAMBDA_NORM_TOL = 1e-12


def _as_vector(v, size: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (size,):
        raise ContractError(f"{name} must have shape ({size},), got {arr.shape}")
    return arr


def vector_norm(v, norm: str = "inf") -> float:
    """Infinity norm by default; ``norm="2"`` gives the Euclidean norm for reporting."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return 0.0
    if norm == "inf":
        return float(np.max(np.abs(v)))
    if norm == "2":
        return float(np.sqrt(np.dot(v.ravel(), v.ravel())))
    raise ValueError(f"unknown norm {norm!r}")


@dataclass(frozen=True, eq=False)
class MultiscaleSystem:
    """Vector fields ``f``, ``g``, the diagonal of ``Lambda`` and ``epsilon``.

    ``f`` maps a slow vector of length ``slow_dim`` to a fast vector of length
    ``fast_dim``; ``g`` maps ``(x, y)`` to a slow vector. When both are numba
    dispatchers the reference integrators run compiled kernels.
    """

    slow_dim: int
    fast_dim: int
    epsilon: float
    lambda_diag: np.ndarray
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = field(default="custom")

    def __post_init__(self):
        if int(self.slow_dim) < 1 or int(self.fast_dim) < 1:
            raise ContractError("slow_dim and fast_dim must be positive")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ContractError(f"epsilon must be positive, got {self.epsilon}")
        lam = _as_vector(self.lambda_diag, self.fast_dim, "lambda_diag")
        if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise ContractError("every diagonal entry of Lambda must be positive")
        if abs(lam.min() - 1.0) > _LAMBDA_NORM_TOL:
            raise ContractError(
                f"Lambda must be normalised so that min(lambda_ii) = 1, got {lam.min()}"
            )
        lam.setflags(write=False)
        object.__setattr__(self, "lambda_diag", lam)
        object.__setattr__(self, "slow_dim", int(self.slow_dim))
        object.__setattr__(self, "fast_dim", int(self.fast_dim))
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def lambda_max(self) -> float:
        return float(self.lambda_diag.max())

    @property
    def jitted(self) -> bool:
        return isinstance(self.f, Dispatcher) and isinstance(self.g, Dispatcher)

    def with_epsilon(self, epsilon: float) -> "MultiscaleSystem":
        return replace(self, epsilon=epsilon)


@dataclass(frozen=True, eq=False)
class State:
    """Fast variables ``x``, slow variables ``y`` and simulation time ``t``."""

    x: np.ndarray
    y: np.ndarray
    t: float = 0.0

    @classmethod
    def of(cls, sys: MultiscaleSystem, x, y, t: float = 0.0) -> "State":
        if t < 0:
            raise ContractError("time must be nonnegative")
        return cls(
            _as_vector(x, sys.fast_dim, "x").copy(),
            _as_vector(y, sys.slow_dim, "y").copy(),
            float(t),
        )


@dataclass(frozen=True)
class ToySystemParams:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ContractError("toy parameters must be finite")


@functools.lru_cache(maxsize=None)
def _toy_fields(a: float, b: float):
    # cached so each (a, b) pair compiles its kernels once
    @njit
    def f(y):
        return np.sin(b * y) ** 2

    @njit
    def g(x, y):
        return -x * y - a * y * y

    return f, g


def toy_system(params: ToySystemParams, epsilon: float) -> MultiscaleSystem:
    """``dy/dt = -x y - a y^2``, ``eps dx/dt = -x + sin^2(b y)``.

    Its lowest-order reduced dynamics is ``dY/dt = -Y sin^2(bY) - a Y^2``.
    """
    f, g = _toy_fields(float(params.a), float(params.b))
    return MultiscaleSystem(
        slow_dim=1,
        fast_dim=1,
        epsilon=epsilon,
        lambda_diag=np.ones(1),
        f=f,
        g=g,
        name=f"toy(a={params.a:g}, b={params.b:g})",
    )


def eval_slow_rhs(sys: MultiscaleSystem, x, y) -> np.ndarray:
    x = _as_vector(x, sys.fast_dim, "x")
    y = _as_vector(y, sys.slow_dim, "y")
    return _as_vector(sys.g(x, y), sys.slow_dim, "g(x, y)")


def eval_fast_rhs(sys: MultiscaleSystem, x, y) -> np.ndarray:
    x = _as_vector(x, sys.fast_dim, "x")
    y = _as_vector(y, sys.slow_dim, "y")
    fy = _as_vector(sys.f(y), sys.fast_dim, "f(y)")
    return (-sys.lambda_diag * x + fy) / sys.epsilon


def approx_manifold(sys: MultiscaleSystem, y) -> np.ndarray:
    """Lowest-order centre manifold ``Lambda^{-1} f(y)``."""
    y = _as_vector(y, sys.slow_dim, "y")
    return _as_vector(sys.f(y), sys.fast_dim, "f(y)") / sys.lambda_diag


def manifold_distance(sys: MultiscaleSystem, x, y, norm: str = "inf") -> float:
    x = _as_vector(x, sys.fast_dim, "x")
    return vector_norm(x - approx_manifold(sys, y), norm)


def eval_reduced_rhs(sys: MultiscaleSystem, Y) -> np.ndarray:
    """Reduced slow vector field ``G(Y) = g(Lambda^{-1} f(Y), Y)``."""
    Y = _as_vector(Y, sys.slow_dim, "Y")
    return eval_slow_rhs(sys, approx_manifold(sys, Y), Y)
