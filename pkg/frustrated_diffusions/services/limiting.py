# frustrated_diffusions/services/limiting.py
"""Limiting (McKean-Vlasov) dynamics: Picard mean functions, limiting paths and the
propagation-of-chaos coupling experiment."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np

from frustrated_diffusions.core.errors import (
    AnalysisError,
    ConvergenceError,
    DivergenceError,
    ParameterError,
)
from frustrated_diffusions.core.rng import (
    INCREMENTS,
    INITIAL,
    PICARD,
    brownian_increments,
    derive_stream,
    normal_block,
)
from frustrated_diffusions.core.series import MeanTrajectory
from frustrated_diffusions.core.settings import settings
from frustrated_diffusions.schemas import ChaosReport, DensitySpec, InitialCondition, ModelParams, RngStream
from frustrated_diffusions.services.parallel import map_ordered
from frustrated_diffusions.services.particle_sim import (
    DIVERGENCE_LIMIT,
    drift_x,
    drift_y,
    sample_initial_values,
    simulate_particles,
)

logger = logging.getLogger(__name__)

# normals cached across Picard sweeps below this many floats
_CACHE_LIMIT = 20_000_000


@dataclass(frozen=True)
class MeanFunctions:
    grid: np.ndarray
    mx: np.ndarray
    my: np.ndarray
    residuals: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        for name in ("grid", "mx", "my"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if not (self.grid.size == self.mx.size == self.my.size):
            raise ParameterError("mean functions: grid and values differ in length")
        if self.grid.size < 2 or np.any(np.diff(self.grid) <= 0):
            raise ParameterError("mean functions need an increasing grid with at least two points")
        if not (np.all(np.isfinite(self.mx)) and np.all(np.isfinite(self.my))):
            raise ParameterError("mean functions have non-finite values")

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def at(self, t: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
        """Piecewise-linear interpolation of (mx, my)."""
        return np.interp(t, self.grid, self.mx), np.interp(t, self.grid, self.my)


@dataclass(frozen=True)
class LimitingPaths:
    times: np.ndarray
    x: np.ndarray  # (steps+1, n_x)
    y: np.ndarray  # (steps+1, n_y)


def means_from_trajectory(traj: MeanTrajectory) -> MeanFunctions:
    """Wrap an analytic mean trajectory (e.g. Fokker-Planck means) as MeanFunctions."""
    return MeanFunctions(grid=traj.times, mx=traj.m1, my=traj.m2)


def _steps_for(T: float, dt: float) -> int:
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ParameterError(f"horizon T={T} is not a whole number of steps dt={dt}")
    return steps


def picard_means(
    p: ModelParams,
    ic: Optional[InitialCondition] = None,
    tol: float = 1e-6,
    mc_copies: int = 100_000,
    *,
    T: Optional[float] = None,
    max_iter: Optional[int] = None,
    antithetic: bool = True,
    replica: int = 0,
) -> MeanFunctions:
    """Fixed point of the Picard map on the limiting mean functions.

    Each sweep integrates mc_copies copies of both populations by EM with the means
    frozen to the previous iterate, then replaces the means by the copy averages.
    The same Brownian increments are used in every sweep.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if mc_copies < 1:
        raise ParameterError(f"mc_copies must be >= 1, got {mc_copies}")
    ic = ic or InitialCondition()
    T = p.horizon if T is None else T
    steps = _steps_for(T, p.dt)
    max_iter = max_iter or settings.picard_max_iter

    if p.sigma == 0 and ic.is_deterministic:
        # every copy follows the same path
        mc_copies, antithetic = 1, False
    if antithetic and mc_copies % 2:
        mc_copies += 1
    drawn = mc_copies // 2 if antithetic else mc_copies

    x0, y0 = sample_initial_values(ic, mc_copies, mc_copies, derive_stream(p.seed, INITIAL, replica))
    stream = derive_stream(p.seed, PICARD, replica)
    sd = p.sigma * math.sqrt(p.dt)
    cache: Optional[list[np.ndarray]] = [] if steps * 2 * drawn <= _CACHE_LIMIT else None

    def normals(k: int) -> tuple[np.ndarray, np.ndarray]:
        if cache is not None and k < len(cache):
            z = cache[k]
        else:
            z = normal_block(stream, k, 2 * drawn) if p.sigma > 0 else np.zeros(2 * drawn)
            if cache is not None:
                cache.append(z)
        zx, zy = z[:drawn], z[drawn:]
        if antithetic:
            zx, zy = np.concatenate((zx, -zx)), np.concatenate((zy, -zy))
        return zx, zy

    grid = p.dt * np.arange(steps + 1)
    mx = np.full(steps + 1, float(np.mean(x0)))
    my = np.full(steps + 1, float(np.mean(y0)))
    residuals: list[float] = []
    logger.info("[Picard] T=%g, %d steps, %d copies, tol=%g", T, steps, mc_copies, tol)

    for it in range(1, max_iter + 1):
        x, y = x0.copy(), y0.copy()
        new_mx, new_my = np.empty_like(mx), np.empty_like(my)
        new_mx[0], new_my[0] = mx[0], my[0]
        for k in range(steps):
            zx, zy = normals(k)
            x = x + p.dt * drift_x(x, mx[k], my[k], p) + sd * zx
            y = y + p.dt * drift_y(y, mx[k], my[k], p) + sd * zy
            if not (np.all(np.abs(x) <= DIVERGENCE_LIMIT) and np.all(np.abs(y) <= DIVERGENCE_LIMIT)):
                raise DivergenceError(f"Picard sweep {it} diverged", step=k, time=(k + 1) * p.dt)
            new_mx[k + 1] = np.mean(x)
            new_my[k + 1] = np.mean(y)
        residual = float(max(np.max(np.abs(new_mx - mx)), np.max(np.abs(new_my - my))))
        residuals.append(residual)
        mx, my = new_mx, new_my
        logger.debug("[Picard] sweep %d residual %.3e", it, residual)
        if residual < tol:
            logger.info("[Picard] converged after %d sweeps (residual %.2e)", it, residual)
            return MeanFunctions(grid=grid, mx=mx, my=my, residuals=tuple(residuals))

    raise ConvergenceError(f"Picard iteration did not converge in {max_iter} sweeps", residual)


def simulate_limiting_pair(
    p: ModelParams,
    means: MeanFunctions,
    *,
    x0: Sequence[float] | np.ndarray,
    y0: Sequence[float] | np.ndarray,
    dw: Optional[np.ndarray] = None,
    stream: Optional[RngStream] = None,
    steps: Optional[int] = None,
) -> LimitingPaths:
    """EM paths of the limiting pair with E[x], E[y] read from `means`.

    `dw` injects Brownian increments of shape (steps, n_x + n_y), x lanes first;
    otherwise they are drawn from `stream` (default: INCREMENTS stream of p.seed).
    """
    x = np.array(x0, dtype=np.float64, ndmin=1)
    y = np.array(y0, dtype=np.float64, ndmin=1)
    n_x, n_y = x.size, y.size
    steps = p.steps if steps is None else steps
    if steps * p.dt > means.horizon + 1e-9 * max(means.horizon, 1.0):
        raise ParameterError(
            f"horizon {steps * p.dt:g} exceeds the mean functions grid (T={means.horizon:g})"
        )
    if dw is None:
        stream = stream or derive_stream(p.seed, INCREMENTS, 0)
        dw = brownian_increments(stream, steps, p.dt, range(n_x + n_y))
    dw = np.asarray(dw, dtype=np.float64)
    if dw.shape != (steps, n_x + n_y):
        raise ParameterError(f"Brownian path has shape {dw.shape}, expected {(steps, n_x + n_y)}")

    times = p.dt * np.arange(steps + 1)
    mx, my = means.at(times)
    xs = np.empty((steps + 1, n_x))
    ys = np.empty((steps + 1, n_y))
    xs[0], ys[0] = x, y
    for k in range(steps):
        x = x + p.dt * drift_x(x, mx[k], my[k], p) + p.sigma * dw[k, :n_x]
        y = y + p.dt * drift_y(y, mx[k], my[k], p) + p.sigma * dw[k, n_x:]
        if not (np.all(np.abs(x) <= DIVERGENCE_LIMIT) and np.all(np.abs(y) <= DIVERGENCE_LIMIT)):
            raise DivergenceError("limiting pair diverged", step=k, time=times[k + 1])
        xs[k + 1], ys[k + 1] = x, y
    return LimitingPaths(times=times, x=xs, y=ys)


def _fokker_planck_means(p: ModelParams, ic: InitialCondition, T: float) -> MeanFunctions:
    from frustrated_diffusions.services.fokker_planck import solve_fp

    if ic.mode == "uniform-value":
        spec = DensitySpec(kind="gaussian", center1=ic.x0, center2=ic.y0)
    else:
        lx, ly = ic.law_x, ic.law_y
        if lx.kind != "uniform" or ly.kind != "uniform" or (lx.high - lx.low) != (ly.high - ly.low):  # type: ignore[union-attr]
            raise ParameterError("Fokker-Planck means support point or equal-width uniform initial laws")
        spec = DensitySpec(
            kind="uniform",
            center1=lx.expectation,  # type: ignore[union-attr]
            center2=ly.expectation,  # type: ignore[union-attr]
            width=0.5 * (lx.high - lx.low),  # type: ignore[union-attr]
        )
    run = solve_fp(p, spec, T=T, sample_dt=p.dt)
    return means_from_trajectory(run.trajectory)


def chaos_error(
    p: ModelParams,
    n_values: Sequence[int] = (10, 40, 160, 640),
    replicas: int = 200,
    T: float = 1.0,
    *,
    ic: Optional[InitialCondition] = None,
    means_source: Literal["picard", "fokker-planck"] = "picard",
    picard_tol: float = 1e-4,
    mc_copies: int = 100_000,
    means: Optional[MeanFunctions] = None,
    threads: Optional[int] = None,
) -> ChaosReport:
    """Coupled-path propagation-of-chaos error against system size.

    For each N and replica, the particle system and the limiting copies of particles
    (x_1, y_1) share initial values and Brownian increments; the error is the sup over
    the time grid of |x_1^N - x_1| + |y_1^N - y_1|.
    """
    if replicas < 1:
        raise ParameterError("replicas must be >= 1")
    n_values = [int(n) for n in n_values]
    if any(n < 2 or n % 2 for n in n_values):
        raise ParameterError(f"every N must be even and >= 2 (alpha=0.5 split), got {n_values}")
    ic = ic or InitialCondition.iid_uniform(0.7, 0.9)
    steps = _steps_for(T, p.dt)

    if means is None:
        if means_source == "picard":
            means = picard_means(p, ic, tol=picard_tol, mc_copies=mc_copies, T=T)
        else:
            means = _fokker_planck_means(p, ic, T)

    errors, stderrs = [], []
    for i_n, n in enumerate(n_values):
        half = n // 2
        pn = p.updated(n1=half, n2=half, steps=steps)

        def one(r: int, pn: ModelParams = pn, half: int = half, i_n: int = i_n) -> float:
            replica = (i_n << 24) | r
            run = simulate_particles(pn, ic, sample_stride=1, replica=replica, track=(0, half))
            tagged = run.tracked
            dw = brownian_increments(derive_stream(pn.seed, INCREMENTS, replica), steps, pn.dt, (0, half))
            lim = simulate_limiting_pair(
                pn, means, x0=tagged[0, :1], y0=tagged[0, 1:], dw=dw, steps=steps
            )
            gap = np.abs(tagged[:, 0] - lim.x[:, 0]) + np.abs(tagged[:, 1] - lim.y[:, 0])
            return float(np.max(gap))

        per_replica = np.asarray(map_ordered(one, range(replicas), threads))
        mean = float(np.mean(per_replica))
        stderr = float(np.std(per_replica, ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0
        errors.append(mean)
        stderrs.append(stderr)
        logger.info("[Chaos] N=%d mean sup-error %.4e (stderr %.1e)", n, mean, stderr)

    if any(e <= 0 for e in errors):
        raise AnalysisError(f"coupling error vanished for some N: {errors}")
    slope = float(np.polyfit(np.log(n_values), np.log(errors), 1)[0]) if len(n_values) > 1 else float("nan")
    return ChaosReport(
        n_values=n_values, errors=errors, stderrs=stderrs, fitted_slope=slope, replicas=replicas
    )


def write_chaos_csv(path: Union[str, Path], report: ChaosReport) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["N,mean_error,stderr"] + [
        f"{n},{e!r},{s!r}" for n, e, s in zip(report.n_values, report.errors, report.stderrs)
    ]
    path.write_text("\n".join(lines) + "\n")


__all__ = [
    "MeanFunctions",
    "LimitingPaths",
    "means_from_trajectory",
    "picard_means",
    "simulate_limiting_pair",
    "chaos_error",
    "write_chaos_csv",
]
