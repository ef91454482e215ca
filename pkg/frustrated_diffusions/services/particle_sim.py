# frustrated_diffusions/services/particle_sim.py
"""Euler-Maruyama integration of the two-population particle system."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from frustrated_diffusions.core.errors import DivergenceError, ParameterError
from frustrated_diffusions.core.rng import INCREMENTS, INITIAL, derive_stream, normal_block, uniform_block
from frustrated_diffusions.core.series import MeanTrajectory
from frustrated_diffusions.schemas import InitialCondition, ModelParams, PopulationLaw, RngStream
from frustrated_diffusions.services.parallel import map_ordered

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class ParticleState:
    t: float
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.float64))
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ParameterError("particle state has non-finite entries")

    def negated(self) -> "ParticleState":
        return ParticleState(self.t, -self.x, -self.y)


@dataclass(frozen=True)
class ParticleRun:
    trajectory: MeanTrajectory
    final_state: Optional[ParticleState] = None
    tracked: Optional[np.ndarray] = None  # (samples, len(track_lanes))
    track_lanes: tuple[int, ...] = ()


def _mean(v: np.ndarray) -> float:
    # exactly rounded, so independent of particle order
    return math.fsum(v.tolist()) / v.size


def empirical_means(s: ParticleState) -> tuple[float, float]:
    if s.x.size == 0 or s.y.size == 0:
        raise ParameterError("empirical means of an empty population")
    return _mean(s.x), _mean(s.y)


def drift_x(x: np.ndarray, m1: float, m2: float, p: ModelParams) -> np.ndarray:
    return -(x * x * x) + x - p.alpha * p.theta11 * (x - m1) - (1.0 - p.alpha) * p.theta12 * (x - m2)


def drift_y(y: np.ndarray, m1: float, m2: float, p: ModelParams) -> np.ndarray:
    return -(y * y * y) + y - p.alpha * p.theta21 * (y - m1) - (1.0 - p.alpha) * p.theta22 * (y - m2)


def _check_finite(x: np.ndarray, y: np.ndarray, k: int, t: float) -> None:
    # NaN fails the comparison too
    if not (np.all(np.abs(x) <= DIVERGENCE_LIMIT) and np.all(np.abs(y) <= DIVERGENCE_LIMIT)):
        raise DivergenceError("particle system diverged", step=k, time=t)


def _sample_law(law: PopulationLaw, u: np.ndarray, z: np.ndarray) -> np.ndarray:
    if law.kind == "point":
        return np.full(u.size, law.value)
    if law.kind == "uniform":
        return law.low + (law.high - law.low) * u
    return law.mean + law.std * z


def sample_initial_values(ic: InitialCondition, n1: int, n2: int, stream: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Initial positions; lane j of the stream belongs to particle j (x first, then y)."""
    if ic.mode == "uniform-value":
        return np.full(n1, ic.x0), np.full(n2, ic.y0)
    u = uniform_block(stream, 0, n1 + n2)
    z = normal_block(stream, 1, n1 + n2)
    x = _sample_law(ic.law_x, u[:n1], z[:n1])  # type: ignore[arg-type]
    y = _sample_law(ic.law_y, u[n1:], z[n1:])  # type: ignore[arg-type]
    return x, y


def initial_state(p: ModelParams, ic: Optional[InitialCondition] = None, replica: int = 0) -> ParticleState:
    ic = ic or InitialCondition()
    n1, n2 = _counts(p)
    x, y = sample_initial_values(ic, n1, n2, derive_stream(p.seed, INITIAL, replica))
    return ParticleState(0.0, x, y)


def _counts(p: ModelParams) -> tuple[int, int]:
    if p.n1 is None or p.n2 is None:
        raise ParameterError("particle simulation needs n1 and n2")
    return p.n1, p.n2


def em_step(
    s: ParticleState,
    p: ModelParams,
    stream: RngStream,
    k: int,
    noise: Optional[np.ndarray] = None,
    means: Optional[tuple[float, float]] = None,
) -> ParticleState:
    """One Euler-Maruyama step from `s` using the step-k block of `stream`.

    `noise` (standard normals, x lanes then y lanes) replaces the stream draw;
    `means` passes already computed empirical means of `s`.
    """
    n1, n2 = s.x.size, s.y.size
    m1, m2 = empirical_means(s) if means is None else means
    z = normal_block(stream, k, n1 + n2) if noise is None else np.asarray(noise, dtype=np.float64)
    sd = p.sigma * math.sqrt(p.dt)
    x = s.x + p.dt * drift_x(s.x, m1, m2, p) + sd * z[:n1]
    y = s.y + p.dt * drift_y(s.y, m1, m2, p) + sd * z[n1:]
    t = s.t + p.dt
    _check_finite(x, y, k, t)
    return ParticleState(t, x, y)


def simulate_particles(
    p: ModelParams,
    ic: Optional[InitialCondition] = None,
    sample_stride: int = 20,
    *,
    replica: int = 0,
    keep_state: bool = False,
    track: Sequence[int] = (),
    state: Optional[ParticleState] = None,
) -> ParticleRun:
    """Run `p.steps` EM steps and record (m1, m2) every `sample_stride` steps.

    Replica r draws its increments from stream (seed, INCREMENTS, r) and its initial
    values from (seed, INITIAL, r). `track` lists global lanes (x lanes first) whose
    positions are recorded at every sample.
    """
    if sample_stride < 1:
        raise ParameterError(f"sample_stride must be >= 1, got {sample_stride}")
    n1, n2 = _counts(p)
    s = state if state is not None else initial_state(p, ic, replica)
    if s.x.size != n1 or s.y.size != n2:
        raise ParameterError(f"state sizes ({s.x.size}, {s.y.size}) do not match n1={n1}, n2={n2}")
    track = tuple(int(j) for j in track)
    if any(not 0 <= j < n1 + n2 for j in track):
        raise ParameterError(f"tracked lanes out of range: {track}")

    stream = derive_stream(p.seed, INCREMENTS, replica)
    n_samples = p.steps // sample_stride + 1
    m1s = np.empty(n_samples)
    m2s = np.empty(n_samples)
    tracked = np.empty((n_samples, len(track))) if track else None
    t0 = s.t
    report_every = max(p.steps // 10, 1)

    def record(i: int, current: ParticleState, m: tuple[float, float]) -> None:
        m1s[i], m2s[i] = m
        if tracked is not None:
            xy = np.concatenate((current.x, current.y))
            tracked[i] = xy[list(track)]

    m = empirical_means(s)
    record(0, s, m)
    for k in range(p.steps):
        s = em_step(s, p, stream, k, means=m)
        m = empirical_means(s)
        if (k + 1) % sample_stride == 0:
            record((k + 1) // sample_stride, s, m)
        if (k + 1) % report_every == 0:
            logger.debug("[Particles] replica %d step %d/%d m=(%.4f, %.4f)", replica, k + 1, p.steps, m[0], m[1])

    traj = MeanTrajectory(t0=t0, dt_sample=sample_stride * p.dt, m1=m1s, m2=m2s)
    return ParticleRun(trajectory=traj, final_state=s if keep_state else None, tracked=tracked, track_lanes=track)


def simulate_replicas(
    p: ModelParams,
    ic: Optional[InitialCondition] = None,
    replicas: int = 1,
    sample_stride: int = 20,
    threads: Optional[int] = None,
) -> list[MeanTrajectory]:
    """Independent replicas 0..replicas-1 of simulate_particles, in replica order."""
    logger.info("[Particles] %d replica(s), N=%d, %d steps, sigma=%g", replicas, p.n, p.steps, p.sigma)

    def one(r: int) -> MeanTrajectory:
        return simulate_particles(p, ic, sample_stride, replica=r).trajectory

    return map_ordered(one, range(replicas), threads)


__all__ = [
    "ParticleState",
    "ParticleRun",
    "empirical_means",
    "drift_x",
    "drift_y",
    "sample_initial_values",
    "initial_state",
    "em_step",
    "simulate_particles",
    "simulate_replicas",
]
