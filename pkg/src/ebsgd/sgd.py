"""Averaged SGD with a polynomially decaying step size.

Every array in this module may carry leading "chain" dimensions: a parameter
of shape ``(d,)`` is a single chain and ``(R, d)`` runs ``R`` independent
chains in lock step. The recursion is elementwise per chain, so a chain's
trajectory does not depend on which other chains it is stacked with.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Protocol

import numpy as np

__all__ = [
    "LearningRateSchedule",
    "IterateState",
    "GradientOracle",
    "DataStream",
    "StreamExhausted",
    "ArrayStream",
    "learning_rate",
    "sgd_step",
    "run_asgd",
]


class StreamExhausted(RuntimeError):
    """Raised when a data stream runs dry before the requested step count."""

    def __init__(self, consumed: int, requested: int):
        self.consumed = consumed
        self.requested = requested
        super().__init__(
            f"data stream exhausted after {consumed} iterates ({requested} requested)"
        )


@dataclass(frozen=True)
class LearningRateSchedule:
    """Step sizes ``eta0 * i**(-alpha)`` for ``i = 1, 2, ...``."""

    eta0: float
    alpha: float

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ValueError(f"eta0 must be positive, got {self.eta0}")
        if not 0.5 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0.5, 1), got {self.alpha}")

    def __call__(self, i):
        return learning_rate(self, i)


def learning_rate(schedule: LearningRateSchedule, i):
    """Return ``eta_i``; ``i`` may be an integer or an integer array (all >= 1)."""
    if np.ndim(i) == 0:
        if i < 1:
            raise ValueError(f"step index must be >= 1, got {i}")
        return schedule.eta0 * float(i) ** (-schedule.alpha)
    i = np.asarray(i, dtype=np.float64)
    if np.any(i < 1):
        raise ValueError("step indices must be >= 1")
    return schedule.eta0 * i ** (-schedule.alpha)


class GradientOracle(Protocol):
    """Stochastic gradient of a per-datum loss.

    ``gradient`` must broadcast over leading chain dimensions: ``theta`` and
    ``x`` of shape ``(..., d)`` with ``y`` of shape ``(...)``.
    """

    dimension: int

    def gradient(self, theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        ...


class DataStream(Protocol):
    """Source of data, consumed in chunks.

    ``take(m)`` returns ``(x, y)`` with ``x`` of shape ``(k, ..., d)`` and ``y``
    of shape ``(k, ...)`` where ``k <= m``; ``k == 0`` means the stream is done.
    """

    def take(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        ...


class ArrayStream:
    """Stream over in-memory arrays ``x`` (n, ..., d) and ``y`` (n, ...)."""

    def __init__(self, x, y):
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError("x and y must have the same number of rows")
        self.pos = 0

    def take(self, m):
        lo = self.pos
        hi = min(lo + m, self.x.shape[0])
        self.pos = hi
        return self.x[lo:hi], self.y[lo:hi]


@dataclass
class IterateState:
    """Position of one (or several stacked) SGD chains.

    ``index`` counts every step taken, burn-in included; ``burned`` counts the
    steps discarded before averaging starts.
    """

    theta: np.ndarray
    index: int
    running_mean: np.ndarray
    burned: int
    burn_in: int = 0

    @classmethod
    def start(cls, theta0, burn_in: int = 0) -> "IterateState":
        theta0 = np.array(theta0, dtype=np.float64)
        if theta0.ndim == 0:
            raise ValueError("theta0 must be a vector")
        if burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        return cls(theta0, 0, np.zeros_like(theta0), 0, int(burn_in))

    @property
    def dimension(self) -> int:
        return self.theta.shape[-1]

    @property
    def n_averaged(self) -> int:
        return self.index - self.burned


def sgd_step(state: IterateState, grad, eta_i: float) -> IterateState:
    """One SGD update ``theta - eta_i * grad``; folds the new iterate into the
    running mean once the burn-in budget is spent."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.theta.shape:
        raise ValueError(
            f"gradient shape {grad.shape} does not match parameter shape {state.theta.shape}"
        )
    theta = state.theta - eta_i * grad
    index = state.index + 1
    if index <= state.burn_in:
        return replace(state, theta=theta, index=index, burned=state.burned + 1)
    k = index - state.burned
    mean = state.running_mean + (theta - state.running_mean) / k
    return replace(state, theta=theta, index=index, running_mean=mean)


def run_asgd(
    oracle: GradientOracle,
    stream: DataStream,
    schedule: LearningRateSchedule,
    theta0=None,
    burn_in: int = 0,
    n: int = 1,
    tracker=None,
    state: IterateState | None = None,
    chunk: int = 4096,
):
    """Run ``burn_in + n`` SGD steps and average the last ``n`` iterates.

    Pass ``state`` (and the matching ``tracker``) from a previous call to
    continue a chain; ``burn_in`` is then ignored and ``n`` more averaged
    steps are taken. Step sizes use the global step index, so the burn-in
    steps consume ``eta_1 .. eta_burn_in``.

    Returns ``(theta_hat, tracker, state)``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if state is None:
        if theta0 is None:
            theta0 = np.zeros(oracle.dimension)
        state = IterateState.start(theta0, burn_in)
        remaining_burn = state.burn_in
    else:
        state = replace(state, theta=state.theta.copy(), running_mean=state.running_mean.copy())
        remaining_burn = max(state.burn_in - state.index, 0)
    if state.theta.shape[-1] != oracle.dimension:
        raise ValueError(
            f"theta0 has dimension {state.theta.shape[-1]}, oracle expects {oracle.dimension}"
        )
    if tracker is not None and tracker.n_seen != state.n_averaged:
        raise ValueError("tracker and state are out of sync")

    theta = state.theta
    mean = state.running_mean
    index = state.index
    burned = state.burned
    total = remaining_burn + n
    done = 0
    while done < total:
        x, y = stream.take(min(chunk, total - done))
        m = len(y)
        if m == 0:
            raise StreamExhausted(index, state.index + total)
        etas = schedule.eta0 * np.arange(index + 1, index + m + 1, dtype=np.float64) ** (
            -schedule.alpha
        )
        for j in range(m):
            theta = theta - etas[j] * oracle.gradient(theta, x[j], y[j])
            index += 1
            if index - state.index <= remaining_burn:
                burned += 1
                continue
            k = index - burned
            mean = mean + (theta - mean) / k
            if tracker is not None:
                tracker.push(theta)
        done += m

    state = IterateState(theta, index, mean, burned, state.burn_in)
    return mean.copy(), tracker, state
