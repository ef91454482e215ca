# frustrated_diffusions/services/ode.py
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

Rhs = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(f: Rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(
    f: Rhs,
    y0: np.ndarray,
    dt: float,
    steps: int,
    record_every: int = 1,
    t0: float = 0.0,
    check: Optional[Callable[[int, float, np.ndarray], None]] = None,
) -> np.ndarray:
    """Fixed-step classical RK4; returns states at steps 0, record_every, 2*record_every, ..."""
    y = np.array(y0, dtype=np.float64)
    out = np.empty((steps // record_every + 1,) + y.shape)
    out[0] = y
    for k in range(steps):
        t = t0 + k * dt
        y = rk4_step(f, t, y, dt)
        if check is not None:
            check(k, t + dt, y)
        if (k + 1) % record_every == 0:
            out[(k + 1) // record_every] = y
    return out


__all__ = ["rk4_step", "rk4_integrate"]
