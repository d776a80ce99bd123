"""Batched explicit Runge-Kutta integrators.

Both drivers advance a whole batch of independent initial states at once,
``y`` of shape (n, m), with the right-hand side called as ``f(t, y)`` where
``t`` has shape (n,).  Step-size control in the adaptive driver is strictly
per node (each row carries its own time and step), so the result for a node
never depends on which other nodes share the batch.  That property is what
makes grid sweeps byte-identical for any worker partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BudgetError, NumericsError

# Fehlberg 4(5) tableau; the 5th-order solution is propagated and the
# difference to the 4th-order one drives the step controller.
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = [
    np.array([1 / 4]),
    np.array([3 / 32, 9 / 32]),
    np.array([1932 / 2197, -7200 / 2197, 7296 / 2197]),
    np.array([439 / 216, -8.0, 3680 / 513, -845 / 4104]),
    np.array([-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40]),
]
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@dataclass
class BatchResult:
    """Endpoint states of a batched integration."""

    y: np.ndarray            # (n, m) final states (frozen at exit for exited rows)
    steps: np.ndarray        # (n,) accepted + rejected step attempts per row
    exited: np.ndarray       # (n,) rows whose trajectory left the chart
    exit_time: np.ndarray    # (n,) time of exit (nan where not exited)


def _check_budget(steps: np.ndarray, max_steps: int):
    if np.any(steps >= max_steps):
        raise BudgetError(
            f"integration budget of {max_steps} steps exhausted "
            f"({int(np.sum(steps >= max_steps))} trajectories)")


def integrate_rk4(f: Callable, t0: float, T: float, y0: np.ndarray,
                  step: float, max_steps: int,
                  exit_fn: Optional[Callable] = None) -> BatchResult:
    """Classical fixed-step 4th-order sweep from t0 to t0 + T.

    The interval is covered by ``ceil(|T|/step)`` equal substeps so the
    endpoint time is hit exactly; every row sees the identical step
    sequence.
    """
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    n = y0.shape[0]
    steps = np.zeros(n, dtype=np.int64)
    exited = np.zeros(n, dtype=bool)
    exit_time = np.full(n, np.nan)
    if T == 0.0:
        return BatchResult(y0.copy(), steps, exited, exit_time)

    nsteps = max(1, math.ceil(abs(T) / step - 1e-12))
    if nsteps > max_steps:
        raise BudgetError(f"{nsteps} fixed steps needed, budget is {max_steps}")
    dt = T / nsteps

    y = y0.copy()
    alive = np.arange(n)
    for k in range(nsteps):
        t = np.full(alive.size, t0 + k * dt)
        ya = y[alive]
        k1 = f(t, ya)
        k2 = f(t + 0.5 * dt, ya + (0.5 * dt) * k1)
        k3 = f(t + 0.5 * dt, ya + (0.5 * dt) * k2)
        k4 = f(t + dt, ya + dt * k3)
        ya = ya + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(ya)):
            raise NumericsError("non-finite state during fixed-step integration")
        y[alive] = ya
        steps[alive] += 1
        if exit_fn is not None:
            out = exit_fn(ya)
            if np.any(out):
                gone = alive[out]
                exited[gone] = True
                exit_time[gone] = t0 + (k + 1) * dt
                alive = alive[~out]
                if alive.size == 0:
                    break
    return BatchResult(y, steps, exited, exit_time)


def integrate_rk45(f: Callable, t0: float, T: float, y0: np.ndarray,
                   first_step: float, abs_tol: float, rel_tol: float,
                   max_steps: int,
                   exit_fn: Optional[Callable] = None) -> BatchResult:
    """Adaptive embedded Fehlberg 4(5) sweep with per-row step control."""
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    n = y0.shape[0]
    steps = np.zeros(n, dtype=np.int64)
    exited = np.zeros(n, dtype=bool)
    exit_time = np.full(n, np.nan)
    if T == 0.0:
        return BatchResult(y0.copy(), steps, exited, exit_time)

    sgn = 1.0 if T > 0 else -1.0
    t_end = t0 + T
    h_floor = abs(T) * 1e-14

    y = y0.copy()
    t = np.full(n, t0)
    h = np.full(n, sgn * min(abs(first_step), abs(T)))
    active = np.arange(n)

    while active.size:
        ya, ta, ha = y[active], t[active], h[active]
        remaining = t_end - ta
        last = np.abs(ha) >= np.abs(remaining)
        ha = np.where(last, remaining, ha)

        ks = [f(ta, ya)]
        for i, row in enumerate(_A):
            incr = sum(row[j] * ks[j] for j in range(len(row)))
            ks.append(f(ta + _C[i + 1] * ha, ya + ha[:, None] * incr))
        incr5 = sum(_B5[j] * ks[j] for j in range(6))
        incr4 = sum(_B4[j] * ks[j] for j in range(6))
        y5 = ya + ha[:, None] * incr5
        y4 = ya + ha[:, None] * incr4

        scale = abs_tol + rel_tol * np.maximum(np.abs(ya), np.abs(y5))
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            err = np.sqrt(np.mean(((y5 - y4) / scale) ** 2, axis=1))
        bad = ~np.isfinite(err)
        accept = (err <= 1.0) & ~bad

        steps[active] += 1
        _check_budget(steps[active], max_steps)

        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            factor = _SAFETY * err ** -0.2
        factor = np.where(err == 0.0, _MAX_FACTOR, factor)
        factor = np.where(bad, _MIN_FACTOR, factor)
        factor = np.clip(factor, _MIN_FACTOR, _MAX_FACTOR)
        h_next = ha * factor

        if np.any(np.abs(h_next[~accept]) < h_floor):
            raise NumericsError("adaptive step size underflow; system too stiff "
                                "for the configured tolerances")

        idx = active
        acc_idx = idx[accept]
        if acc_idx.size:
            ynew = y5[accept]
            if not np.all(np.isfinite(ynew)):
                raise NumericsError("non-finite state during adaptive integration")
            y[acc_idx] = ynew
            t[acc_idx] = np.where(last[accept], t_end, ta[accept] + ha[accept])
        h[idx] = h_next

        done = np.zeros(active.size, dtype=bool)
        done[accept & last] = True
        if exit_fn is not None and acc_idx.size:
            out = exit_fn(y[acc_idx])
            if np.any(out):
                gone = acc_idx[out]
                exited[gone] = True
                exit_time[gone] = t[gone]
                done[np.isin(active, gone)] = True
        active = active[~done]

    return BatchResult(y, steps, exited, exit_time)
