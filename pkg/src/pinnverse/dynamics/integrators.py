"""Fixed-step fourth-order Runge-Kutta integration on a uniform internal grid.

The internal grid t_k = k * T / n_steps is independent of the requested
sample times. A sample that falls between two nodes is reached by one
partial step from the preceding node; the partial state is not carried
forward, so every sample sees the same node sequence.
"""

import logging
from typing import Callable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 4096

RhsFunction = Callable[[np.ndarray], np.ndarray]


def rk4_step(f: RhsFunction, y: np.ndarray, h: float) -> np.ndarray:
    """Classic RK4 step for an autonomous system dy/dt = f(y)."""
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def validate_sample_times(times: Sequence[float]) -> np.ndarray:
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size == 0:
        raise ValueError("At least one sample time is required")
    if times[0] != 0.0:
        raise ValueError(f"Sample times must start at 0, got {times[0]}")
    if np.any(np.diff(times) <= 0):
        raise ValueError("Sample times must be strictly increasing")
    return times


def integrate_fixed_grid(
    f: RhsFunction,
    y0: np.ndarray,
    times: Sequence[float],
    n_steps: int = DEFAULT_STEPS,
    final_time: Optional[float] = None,
    observer: Optional[Callable[[float, np.ndarray], None]] = None,
) -> np.ndarray:
    """Integrate from t=0 and return the state at every sample time.

    Args:
        f: Autonomous right-hand side
        y0: Initial state (any shape)
        times: Strictly increasing sample times starting at 0
        n_steps: Number of internal steps covering [0, final_time]
        final_time: Length of the internal grid; defaults to times[-1]
        observer: Optional callback invoked as observer(t, y) per sample

    Returns:
        Array of shape (len(times), *y0.shape)
    """
    times = validate_sample_times(times)
    if n_steps < 1:
        raise ValueError(f"n_steps must be positive, got {n_steps}")
    horizon = float(times[-1] if final_time is None else final_time)
    if times[-1] > horizon * (1 + 1e-12):
        raise ValueError(
            f"Sample time {times[-1]} lies beyond the integration horizon {horizon}"
        )

    y = np.array(y0, copy=True)
    out = np.empty((times.size,) + y.shape, dtype=y.dtype)
    if horizon == 0.0:
        out[:] = y
        if observer is not None:
            observer(0.0, y)
        return out

    h = horizon / n_steps
    tol = 1e-12 * horizon
    k = 0
    for i, tau in enumerate(times):
        while k < n_steps and (k + 1) * h <= tau + tol:
            y = rk4_step(f, y, h)
            k += 1
        remainder = tau - k * h
        sample = rk4_step(f, y, remainder) if remainder > tol else y
        out[i] = sample
        if observer is not None:
            observer(float(tau), sample)

    logger.debug(f"RK4 integrated {k} steps of h={h:.3e} for {times.size} samples")
    return out
