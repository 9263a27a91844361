"""Fixed-step RK4 solutions of control-affine systems under step-function controls.

Steps are split at control breakpoints, so every RK4 step sees a constant
control and the computed curve is a concatenation of smooth pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BlowUpError, DimensionError
from .system import ControlAffineSystem, PiecewiseConstantControl, control_value

BLOWUP_NORM = 1e12


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), n)
    control: PiecewiseConstantControl

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def time_grid(horizon: float, step: float, breakpoints: Sequence[float] = ()) -> np.ndarray:
    """Grid ``0, h, 2h, ...`` ending exactly at ``horizon``, with breakpoints inserted.

    Grid points closer than 1e-9*h to a breakpoint or to the horizon are
    replaced by it, so no step is shorter than that.
    """
    if not (horizon > 0 and step > 0):
        raise ValueError(f"horizon and step must be positive, got {horizon!r}, {step!r}")
    tol = 1e-9 * step
    count = int(math.floor(horizon / step + 1e-9))
    times = [i * step for i in range(count + 1)]
    if times[-1] >= horizon - tol:
        times[-1] = horizon
    else:
        times.append(horizon)
    grid = np.asarray(times)
    extra = []
    for b in breakpoints:
        if b <= tol or b >= horizon - tol:
            continue
        j = int(np.argmin(np.abs(grid - b)))
        if abs(grid[j] - b) <= tol:
            grid[j] = b
        elif not any(abs(e - b) <= tol for e in extra):
            extra.append(b)
    if extra:
        grid = np.sort(np.concatenate([grid, extra]))
    return grid


def rk4_step(system: ControlAffineSystem, X: np.ndarray, U: np.ndarray, dt: float) -> np.ndarray:
    f = system.rhs_batch
    k1 = f(X, U)
    k2 = f(X + (0.5 * dt) * k1, U)
    k3 = f(X + (0.5 * dt) * k2, U)
    k4 = f(X + dt * k3, U)
    return X + dt * ((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)


def _check_finite(X: np.ndarray, time: float) -> None:
    bad = ~np.all(np.isfinite(X), axis=1)
    if not np.any(bad):
        norms = np.sqrt(np.sum(X * X, axis=1))
        bad = norms > BLOWUP_NORM
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise BlowUpError(time, f"state norm exceeded {BLOWUP_NORM:g}", row=idx)


def integrate_constant(system: ControlAffineSystem, X0: np.ndarray, U: np.ndarray, times: np.ndarray):
    """Integrate a batch with control ``U`` held over ``times``; yields the state after each step."""
    X = X0
    with np.errstate(over="ignore", invalid="ignore"):
        for a, b in zip(times[:-1], times[1:]):
            X = rk4_step(system, X, U, float(b - a))
            _check_finite(X, float(b))
            yield X


def integrate_trajectory(
    system: ControlAffineSystem,
    x0,
    u: PiecewiseConstantControl,
    horizon: float,
    step: float,
) -> Trajectory:
    """RK4 solution on ``[0, horizon]`` with the state recorded at every grid time.

    Raises:
        BlowUpError: a state became non-finite or exceeded norm 1e12; the
            error carries the first offending time.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != system.n:
        raise DimensionError(f"initial state has dimension {x0.shape[0]}, system expects {system.n}")
    if u.m != system.m:
        raise DimensionError(f"control has dimension {u.m}, system expects {system.m}")
    if step > horizon:
        raise ValueError(f"step {step!r} exceeds horizon {horizon!r}")
    times = time_grid(horizon, step, u.breakpoints)
    states = np.empty((times.size, system.n))
    states[0] = x0
    X = x0[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(times.size - 1):
            a, b = float(times[i]), float(times[i + 1])
            U = control_value(u, 0.5 * (a + b))
            try:
                X = rk4_step(system, X, U, b - a)
                _check_finite(X, b)
            except BlowUpError as exc:
                raise BlowUpError(b, "state left the bounded region", control=u) from exc
            states[i + 1] = X[0]
    return Trajectory(times, states, u)


def flow_endpoint(system: ControlAffineSystem, x0, u: PiecewiseConstantControl, s: float, step: float) -> np.ndarray:
    """phi(s, x0, u); the step is shortened to ``s`` when ``s < step``."""
    if s < 0:
        raise ValueError("flow time must be >= 0")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if s == 0:
        return x0.copy()
    return integrate_trajectory(system, x0, u, s, min(step, s)).final_state


def richardson_error(
    system: ControlAffineSystem,
    x0,
    controls: Sequence[PiecewiseConstantControl],
    horizon: float,
    step: float,
) -> float:
    """Global-error estimate ``max |phi_h - phi_{h/2}| * 16/15`` over ``controls``."""
    worst = 0.0
    for u in controls:
        coarse = flow_endpoint(system, x0, u, horizon, step)
        fine = flow_endpoint(system, x0, u, horizon, step / 2)
        worst = max(worst, float(np.linalg.norm(coarse - fine)) * 16.0 / 15.0)
    return worst
