# frustrated_diffusions/services/fokker_planck.py
"""Finite-volume solver for the coupled nonlinear Fokker-Planck equations of the
limiting laws q1, q2 (exponentially fitted Chang-Cooper / Scharfetter-Gummel fluxes,
zero-flux boundaries, explicit adaptive time stepping)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from frustrated_diffusions.core.errors import ParameterError, SchemeError
from frustrated_diffusions.core.series import MeanTrajectory
from frustrated_diffusions.schemas import DensitySpec, ModelParams

logger = logging.getLogger(__name__)

MASS_STEP_TOL = 1e-6
NEGATIVITY_TOL = 1e-12


@dataclass(frozen=True)
class DensityPair:
    grid: np.ndarray  # cell centres on [-L, L]
    q1: np.ndarray
    q2: np.ndarray
    t: float = 0.0

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def L(self) -> float:
        return 0.5 * self.h * self.grid.size

    def means(self) -> tuple[float, float]:
        return density_moment(self.q1, self.grid, 1), density_moment(self.q2, self.grid, 1)

    def masses(self) -> tuple[float, float]:
        return density_moment(self.q1, self.grid, 0), density_moment(self.q2, self.grid, 0)

    def clamped(self) -> "DensityPair":
        low = min(float(self.q1.min()), float(self.q2.min()))
        if low < -NEGATIVITY_TOL:
            logger.warning("[FP] density negativity %.2e at t=%g beyond tolerance", low, self.t)
        return DensityPair(self.grid, np.maximum(self.q1, 0.0), np.maximum(self.q2, 0.0), self.t)


@dataclass
class FokkerPlanckRun:
    trajectory: MeanTrajectory
    snapshots: list[DensityPair] = field(default_factory=list)
    max_mass_drift: float = 0.0
    steps: int = 0


def cell_grid(L: float, cells: int) -> np.ndarray:
    """Cell centres of a uniform mesh on [-L, L], exactly symmetric about 0."""
    if L <= 0 or cells < 2:
        raise ParameterError(f"grid needs L > 0 and at least two cells, got L={L}, cells={cells}")
    h = 2.0 * L / cells
    return (np.arange(cells) - 0.5 * (cells - 1)) * h


def _faces(grid: np.ndarray) -> np.ndarray:
    # interior faces only
    return 0.5 * (grid[:-1] + grid[1:])


def density_moment(q: np.ndarray, grid: np.ndarray, p: int) -> float:
    """Midpoint-rule approximation of the p-th moment of q."""
    if p < 0:
        raise ParameterError(f"moment order must be >= 0, got {p}")
    h = float(grid[1] - grid[0])
    weights = np.ones_like(grid) if p == 0 else grid**p
    return float(np.sum(weights * q) * h)


def _normalized(values: np.ndarray, h: float) -> np.ndarray:
    mass = float(np.sum(values) * h)
    if not mass > 0:
        raise ParameterError("initial density has no mass on the grid")
    return values / mass


def initial_densities(spec: DensitySpec, grid: np.ndarray) -> DensityPair:
    h = float(grid[1] - grid[0])

    def one(center: float) -> np.ndarray:
        if spec.kind == "gaussian":
            return np.exp(-0.5 * ((grid - center) / spec.width) ** 2)
        return (np.abs(grid - center) <= spec.width).astype(np.float64)

    return DensityPair(grid, _normalized(one(spec.center1), h), _normalized(one(spec.center2), h), 0.0)


def gibbs_density(grid: np.ndarray, sigma: float) -> np.ndarray:
    """Stationary density Z^-1 exp(-2V/sigma^2), V = x^4/4 - x^2/2, of one decoupled population."""
    if sigma <= 0:
        raise ParameterError("the Gibbs density needs sigma > 0")
    V = 0.25 * grid**4 - 0.5 * grid**2
    w = np.exp(-2.0 * (V - V.min()) / (sigma * sigma))
    return _normalized(w, float(grid[1] - grid[0]))


def drifts(x: np.ndarray, m1: float, m2: float, p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    a = p.alpha
    b1 = (1.0 - a * p.theta11 - (1.0 - a) * p.theta12) * x - x * x * x + a * p.theta11 * m1 + (1.0 - a) * p.theta12 * m2
    b2 = (1.0 - a * p.theta21 - (1.0 - a) * p.theta22) * x - x * x * x + a * p.theta21 * m1 + (1.0 - a) * p.theta22 * m2
    return b1, b2


def drift_moments(d: DensityPair, p: ModelParams) -> tuple[float, float]:
    """<b1, q1>, <b2, q2>: the time derivatives of the means."""
    m1, m2 = d.means()
    b1, b2 = drifts(d.grid, m1, m2, p)
    return float(np.sum(b1 * d.q1) * d.h), float(np.sum(b2 * d.q2) * d.h)


def _bernoulli(w: np.ndarray) -> np.ndarray:
    out = np.ones_like(w)
    big = np.abs(w) > 1e-10
    with np.errstate(over="ignore"):
        out[big] = w[big] / np.expm1(w[big])
    return out


def _flux(q: np.ndarray, b: np.ndarray, D: float, h: float) -> np.ndarray:
    """Fluxes at interior faces for drift b (face values) and diffusion D."""
    if D == 0:
        return np.maximum(b, 0.0) * q[:-1] + np.minimum(b, 0.0) * q[1:]
    w = b * h / D
    return (D / h) * (_bernoulli(-w) * q[:-1] - _bernoulli(w) * q[1:])


def _divergence(flux: np.ndarray) -> np.ndarray:
    # zero flux through both boundary faces
    padded = np.concatenate(([0.0], flux, [0.0]))
    return padded[1:] - padded[:-1]


def stable_dt(d: DensityPair, p: ModelParams) -> float:
    """Largest explicit step: min(0.5 h^2/sigma^2, 0.5 h / max|b|)."""
    m1, m2 = d.means()
    b1, b2 = drifts(_faces(d.grid), m1, m2, p)
    bmax = max(float(np.max(np.abs(b1))), float(np.max(np.abs(b2))))
    h = d.h
    limits = [np.inf]
    if p.sigma > 0:
        limits.append(0.5 * h * h / (p.sigma * p.sigma))
    if bmax > 0:
        limits.append(0.5 * h / bmax)
    return float(min(limits))


def fp_step(d: DensityPair, p: ModelParams, dt_pde: float) -> DensityPair:
    """One explicit conservative step; means come from the pre-step densities."""
    if dt_pde <= 0:
        raise ParameterError(f"dt_pde must be positive, got {dt_pde}")
    h = d.h
    D = 0.5 * p.sigma * p.sigma
    m1, m2 = d.means()
    b1, b2 = drifts(_faces(d.grid), m1, m2, p)
    r = dt_pde / h
    q1 = d.q1 - r * _divergence(_flux(d.q1, b1, D, h))
    q2 = d.q2 - r * _divergence(_flux(d.q2, b2, D, h))
    out = DensityPair(d.grid, q1, q2, d.t + dt_pde)
    before, after = d.masses(), out.masses()
    drift = max(abs(after[0] - before[0]), abs(after[1] - before[1]))
    if drift > MASS_STEP_TOL or not (np.all(np.isfinite(q1)) and np.all(np.isfinite(q2))):
        raise SchemeError(f"Fokker-Planck step lost mass ({drift:.2e})", time=out.t)
    return out


def solve_fp(
    p: ModelParams,
    ic: Optional[DensitySpec] = None,
    T: float = 200.0,
    sample_dt: float = 0.1,
    *,
    L: float = 4.0,
    cells: int = 800,
    snapshot_every: Optional[float] = None,
) -> FokkerPlanckRun:
    """Evolve both densities to time T, recording means every `sample_dt`.

    Steps are shortened to land on every output time. Snapshots are taken every
    `snapshot_every` time units (rounded to a multiple of sample_dt).
    """
    if T <= 0 or sample_dt <= 0:
        raise ParameterError(f"T and sample_dt must be positive, got T={T}, sample_dt={sample_dt}")
    ic = ic or DensitySpec()
    d = initial_densities(ic, cell_grid(L, cells))
    n_out = int(round(T / sample_dt))
    snap_stride = max(int(round(snapshot_every / sample_dt)), 1) if snapshot_every else 0

    m1s, m2s = np.empty(n_out + 1), np.empty(n_out + 1)
    m1s[0], m2s[0] = d.means()
    snapshots = [d.clamped()] if snap_stride else []
    start_mass = np.array(d.masses())
    max_drift = 0.0
    steps = 0
    logger.info("[FP] L=%g cells=%d T=%g sigma=%g", L, cells, T, p.sigma)

    for i in range(1, n_out + 1):
        t_target = i * sample_dt
        while d.t < t_target - 1e-12 * max(t_target, 1.0):
            dt = min(stable_dt(d, p), t_target - d.t)
            d = fp_step(d, p, dt)
            steps += 1
        d = DensityPair(d.grid, d.q1, d.q2, t_target)
        m1s[i], m2s[i] = d.means()
        drift = float(np.max(np.abs(np.array(d.masses()) - start_mass)))
        max_drift = max(max_drift, drift / t_target)
        if snap_stride and i % snap_stride == 0:
            snapshots.append(d.clamped())
        if i % max(n_out // 10, 1) == 0:
            logger.debug("[FP] t=%g means=(%.4f, %.4f) steps=%d", t_target, m1s[i], m2s[i], steps)

    traj = MeanTrajectory(t0=0.0, dt_sample=sample_dt, m1=m1s, m2=m2s)
    return FokkerPlanckRun(trajectory=traj, snapshots=snapshots, max_mass_drift=max_drift, steps=steps)


def write_snapshots(directory: Union[str, Path], snapshots: list[DensityPair]) -> list[Path]:
    """One `x,q1,q2` CSV per snapshot, named by sample time."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for snap in snapshots:
        path = directory / f"density_t{snap.t:09.3f}.csv"
        lines = ["x,q1,q2"] + [
            f"{float(x)!r},{float(a)!r},{float(b)!r}" for x, a, b in zip(snap.grid, snap.q1, snap.q2)
        ]
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def read_snapshot(path: Union[str, Path]) -> DensityPair:
    path = Path(path)
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise ParameterError(f"cannot read density snapshot {path}: {e}") from e
    if data.shape[1] != 3:
        raise ParameterError(f"{path}: expected columns x,q1,q2")
    t = float(path.stem.split("_t")[-1]) if "_t" in path.stem else 0.0
    return DensityPair(data[:, 0], data[:, 1], data[:, 2], t)


__all__ = [
    "DensityPair",
    "FokkerPlanckRun",
    "cell_grid",
    "density_moment",
    "initial_densities",
    "gibbs_density",
    "drifts",
    "drift_moments",
    "stable_dt",
    "fp_step",
    "solve_fp",
    "write_snapshots",
    "read_snapshot",
]
