# frustrated_diffusions/services/moments.py
"""Gaussian moment closure: moment ODEs, Hopf analysis of the symmetric equilibrium
and the Gaussian (tilde) approximation of the limiting pair."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np
from scipy.optimize import bisect

from frustrated_diffusions.core.errors import (
    DivergenceError,
    HopfConsistencyError,
    NoSignChangeError,
    ParameterError,
)
from frustrated_diffusions.core.rng import TILDE, brownian_increments, derive_stream
from frustrated_diffusions.core.series import MeanTrajectory
from frustrated_diffusions.schemas import InitialCondition, ModelParams, RngStream, TildeErrorReport
from frustrated_diffusions.services.limiting import picard_means, simulate_limiting_pair

logger = logging.getLogger(__name__)

EIGEN_TOL = 1e-8
REFERENCE_COUPLING = 4.0


@dataclass(frozen=True)
class MomentState:
    m1: float
    m2: float
    v1: float
    v2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.m1, self.m2, self.v1, self.v2])

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "MomentState":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


def _coefficients(p: ModelParams) -> tuple[float, float, float, float, float]:
    return p.A, p.B, p.alpha * p.theta11, (1.0 - p.alpha) * p.theta22, p.sigma * p.sigma


def _rhs(m1: float, m2: float, v1: float, v2: float, A: float, B: float, c11: float, c22: float, s2: float):
    return (
        -m1 * m1 * m1 + m1 * (1.0 - 3.0 * v1) - A * (m1 - m2),
        -m2 * m2 * m2 + m2 * (1.0 - 3.0 * v2) + B * (m2 - m1),
        -6.0 * v1 * v1 - 6.0 * m1 * m1 * v1 + 2.0 * v1 - 2.0 * c11 * v1 - 2.0 * A * v1 + s2,
        -6.0 * v2 * v2 - 6.0 * m2 * m2 * v2 + 2.0 * v2 + 2.0 * B * v2 - 2.0 * c22 * v2 + s2,
    )


def moment_rhs(s: MomentState, p: ModelParams) -> MomentState:
    """Time derivative of (m1, m2, v1, v2) under the Gaussian closure."""
    return MomentState(*_rhs(s.m1, s.m2, s.v1, s.v2, *_coefficients(p)))


def quadrature_moment_rhs(s: MomentState, p: ModelParams, nodes: int = 12) -> MomentState:
    """Moment derivatives from Gauss-Hermite quadrature of the exact drifts under X ~ N(m, v).

    dm/dt = E[b(X)], dv/dt = 2 Cov(X, b(X)) + sigma^2; exact for the cubic drift.
    """
    z, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    a = p.alpha

    def b1(x: np.ndarray) -> np.ndarray:
        return -(x**3) + x - a * p.theta11 * (x - s.m1) - (1.0 - a) * p.theta12 * (x - s.m2)

    def b2(x: np.ndarray) -> np.ndarray:
        return -(x**3) + x - a * p.theta21 * (x - s.m1) - (1.0 - a) * p.theta22 * (x - s.m2)

    out = []
    for m, v, b in ((s.m1, s.v1, b1), (s.m2, s.v2, b2)):
        x = m + math.sqrt(max(v, 0.0)) * z
        bx = b(x)
        out.append((float(np.dot(w, bx)), float(2.0 * np.dot(w, (x - m) * bx) + p.sigma * p.sigma)))
    return MomentState(out[0][0], out[1][0], out[0][1], out[1][1])


def moment_jacobian(s: MomentState, p: ModelParams) -> np.ndarray:
    A, B, c11, c22, _ = _coefficients(p)
    m1, m2, v1, v2 = s.m1, s.m2, s.v1, s.v2
    return np.array(
        [
            [-3.0 * m1 * m1 + 1.0 - 3.0 * v1 - A, A, -3.0 * m1, 0.0],
            [-B, -3.0 * m2 * m2 + 1.0 - 3.0 * v2 + B, 0.0, -3.0 * m2],
            [-12.0 * m1 * v1, 0.0, -12.0 * v1 - 6.0 * m1 * m1 + 2.0 - 2.0 * c11 - 2.0 * A, 0.0],
            [0.0, -12.0 * m2 * v2, 0.0, -12.0 * v2 - 6.0 * m2 * m2 + 2.0 + 2.0 * B - 2.0 * c22],
        ]
    )


def integrate_moments(
    s0: MomentState,
    p: ModelParams,
    T: float,
    dt_ode: float = 0.001,
    sample_stride: int = 100,
    method: Literal["rk4", "euler"] = "rk4",
) -> MeanTrajectory:
    """Fixed-step trajectory of the closure ODE, sampled every `sample_stride` steps.

    `euler` matches the explicit discretization used for the particle paths.
    """
    if dt_ode <= 0:
        raise ParameterError(f"dt_ode must be positive, got {dt_ode}")
    if sample_stride < 1:
        raise ParameterError(f"sample_stride must be >= 1, got {sample_stride}")
    if s0.v1 < 0 or s0.v2 < 0:
        raise ParameterError("initial variances must be nonnegative")
    coeffs = _coefficients(p)
    steps = int(round(T / dt_ode))
    n_samples = steps // sample_stride + 1
    out = np.empty((n_samples, 4))
    m1, m2, v1, v2 = s0.m1, s0.m2, s0.v1, s0.v2
    y = (m1, m2, v1, v2)
    out[0] = y
    h, h2, h6 = dt_ode, 0.5 * dt_ode, dt_ode / 6.0

    for k in range(steps):
        a = _rhs(m1, m2, v1, v2, *coeffs)
        if method == "rk4":
            b = _rhs(m1 + h2 * a[0], m2 + h2 * a[1], v1 + h2 * a[2], v2 + h2 * a[3], *coeffs)
            c = _rhs(m1 + h2 * b[0], m2 + h2 * b[1], v1 + h2 * b[2], v2 + h2 * b[3], *coeffs)
            d = _rhs(m1 + h * c[0], m2 + h * c[1], v1 + h * c[2], v2 + h * c[3], *coeffs)
            m1 += h6 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0])
            m2 += h6 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1])
            v1 += h6 * (a[2] + 2.0 * b[2] + 2.0 * c[2] + d[2])
            v2 += h6 * (a[3] + 2.0 * b[3] + 2.0 * c[3] + d[3])
        else:
            m1, m2, v1, v2 = m1 + h * a[0], m2 + h * a[1], v1 + h * a[2], v2 + h * a[3]
        y = (m1, m2, v1, v2)
        if not all(abs(val) <= 1e6 for val in y):
            raise DivergenceError("moment closure diverged", step=k, time=(k + 1) * h)
        if y[2] < -1e-12 or y[3] < -1e-12:
            raise DivergenceError("closure variance became negative", step=k, time=(k + 1) * h)
        if (k + 1) % sample_stride == 0:
            out[(k + 1) // sample_stride] = y

    logger.debug("[Moments] integrated T=%g (%d steps, %s), final %s", T, steps, method, y)
    return MeanTrajectory(
        t0=0.0,
        dt_sample=dt_ode * sample_stride,
        m1=out[:, 0],
        m2=out[:, 1],
        v1=out[:, 2],
        v2=out[:, 3],
    )


# ── Hopf analysis of the symmetric equilibrium (0, 0, v1, v2) ────────────────

def _nonnegative_root(b: float, s2: float) -> float:
    # root of -6v^2 + b v + s2 = 0 with v >= 0
    root = math.sqrt(b * b + 24.0 * s2)
    if b >= 0:
        return (b + root) / 12.0
    return 2.0 * s2 / (root - b) if s2 > 0 else 0.0


def is_reference_regime(p: ModelParams) -> bool:
    return (
        abs(p.alpha * p.theta11 - REFERENCE_COUPLING) < 1e-12
        and abs((1.0 - p.alpha) * p.theta22 - REFERENCE_COUPLING) < 1e-12
    )


def hopf_equilibrium(p: ModelParams, sigma: Optional[float] = None) -> tuple[float, float]:
    """Variances (v1, v2) of the equilibrium (0, 0, v1, v2) of the closure at noise sigma."""
    sigma = p.sigma if sigma is None else sigma
    A, B, c11, c22, _ = _coefficients(p)
    s2 = sigma * sigma
    return (
        _nonnegative_root(2.0 - 2.0 * c11 - 2.0 * A, s2),
        _nonnegative_root(2.0 + 2.0 * B - 2.0 * c22, s2),
    )


def hopf_equilibrium_closed_form(A: float, B: float, sigma: float) -> tuple[float, float]:
    """Closed form valid when alpha*theta11 = (1-alpha)*theta22 = 4."""
    s1 = math.sqrt((3.0 + A) ** 2 + 6.0 * sigma * sigma)
    s2 = math.sqrt((B - 3.0) ** 2 + 6.0 * sigma * sigma)
    return (-(3.0 + A) + s1) / 6.0, (B - 3.0 + s2) / 6.0


def hopf_eigenvalues_closed_form(A: float, B: float, sigma: float) -> np.ndarray:
    """lambda_1..lambda_4 at the symmetric equilibrium in the reference coupling regime (alpha*theta11 = (1-alpha)*theta22 = 4)."""
    s1 = math.sqrt((3.0 + A) ** 2 + 6.0 * sigma * sigma)
    s2 = math.sqrt((B - 3.0) ** 2 + 6.0 * sigma * sigma)
    centre = (10.0 - A + B - s1 - s2) / 4.0
    half_gap = 0.5 * np.emath.sqrt(((-A - B - s1 + s2) / 2.0) ** 2 - 4.0 * A * B)
    return np.array([centre - half_gap, centre + half_gap, -2.0 * s1, -2.0 * s2], dtype=complex)


def _order_pair(pair: np.ndarray) -> np.ndarray:
    # lambda_1 first: negative imaginary part, or the smaller real root
    return pair[np.lexsort((pair.real, pair.imag))] if np.any(pair.imag != 0) else np.sort(pair.real).astype(complex)


def _match(expected: np.ndarray, observed: np.ndarray) -> float:
    return max(float(np.min(np.abs(observed - e))) for e in expected)


def hopf_eigenvalues(p: ModelParams, sigma: Optional[float] = None) -> np.ndarray:
    """Eigenvalues (lambda_1..lambda_4) of the closure Jacobian at (0, 0, v1, v2).

    The full 4x4 spectrum is checked against the block decomposition and, in the
    reference coupling regime (alpha*theta11 = (1-alpha)*theta22 = 4), against the closed forms.
    """
    sigma = p.sigma if sigma is None else sigma
    v1, v2 = hopf_equilibrium(p, sigma)
    J = moment_jacobian(MomentState(0.0, 0.0, v1, v2), p)
    full = np.linalg.eigvals(J).astype(complex)
    numeric = np.concatenate((_order_pair(np.linalg.eigvals(J[:2, :2]).astype(complex)), [J[2, 2], J[3, 3]]))
    gap = _match(numeric, full)
    if gap > EIGEN_TOL:
        raise HopfConsistencyError(f"block eigenvalues differ from the 4x4 spectrum by {gap:.2e} at sigma={sigma}")
    if not is_reference_regime(p):
        return numeric
    closed = hopf_eigenvalues_closed_form(p.A, p.B, sigma)
    gap = float(np.max(np.abs(closed - numeric)))
    if gap > EIGEN_TOL:
        raise HopfConsistencyError(f"closed-form eigenvalues differ from numeric ones by {gap:.2e} at sigma={sigma}")
    return closed


@dataclass(frozen=True)
class HopfReport:
    sigma_grid: np.ndarray
    eigen_table: np.ndarray  # (n, 4) complex
    v_tilde: np.ndarray  # (n, 2)
    complex_pair: np.ndarray  # (n,) bool
    sigma_c: Optional[float] = None


def find_sigma_c(p: ModelParams, sigma_lo: float, sigma_hi: float, tol: float = 1e-6) -> float:
    """Bisection on sigma -> Re lambda_1(sigma)."""

    def re_l1(s: float) -> float:
        return float(hopf_eigenvalues(p, s)[0].real)

    f_lo, f_hi = re_l1(sigma_lo), re_l1(sigma_hi)
    if f_lo * f_hi > 0:
        raise NoSignChangeError(sigma_lo, sigma_hi, f_lo, f_hi)
    if f_lo == 0:
        return sigma_lo
    if f_hi == 0:
        return sigma_hi
    sigma_c = float(bisect(re_l1, sigma_lo, sigma_hi, xtol=tol, maxiter=200))
    logger.info("[Hopf] A=%g B=%g sigma_c=%.6f", p.A, p.B, sigma_c)
    return sigma_c


def hopf_scan(p: ModelParams, sigma_grid: Sequence[float], tol: float = 1e-6) -> HopfReport:
    """Eigenvalue table over sigma; sigma_c refined in the first sign change of Re lambda_1."""
    grid = np.asarray(sigma_grid, dtype=np.float64)
    table = np.array([hopf_eigenvalues(p, s) for s in grid]).reshape(grid.size, 4)
    v_tilde = np.array([hopf_equilibrium(p, s) for s in grid]).reshape(grid.size, 2)
    complex_pair = np.abs(table[:, 0].imag) > 0
    if np.any(~complex_pair):
        logger.warning("[Hopf] lambda_1, lambda_2 real at %d of %d sigma values", int(np.sum(~complex_pair)), grid.size)
    sigma_c = None
    re = table[:, 0].real
    # a grid point exactly on the crossing counts as a flip into it
    flips = np.nonzero(((re[:-1] > 0) & (re[1:] <= 0)) | ((re[:-1] < 0) & (re[1:] >= 0)))[0]
    if flips.size:
        i = int(flips[0])
        sigma_c = find_sigma_c(p, float(grid[i]), float(grid[i + 1]), tol)
    return HopfReport(sigma_grid=grid, eigen_table=table, v_tilde=v_tilde, complex_pair=complex_pair, sigma_c=sigma_c)


def write_hopf_csv(path: Union[str, Path], report: HopfReport) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["sigma,re_l1,im_l1,re_l2,im_l2,l3,l4"]
    for s, row in zip(report.sigma_grid, report.eigen_table):
        vals = [s, row[0].real, row[0].imag, row[1].real, row[1].imag, row[2].real, row[3].real]
        lines.append(",".join(repr(float(v)) for v in vals))
    path.write_text("\n".join(lines) + "\n")


# ── Gaussian (tilde) approximation ───────────────────────────────────────────

@dataclass(frozen=True)
class TildePath:
    times: np.ndarray
    z1: np.ndarray  # (steps+1, n)
    z2: np.ndarray
    xt: np.ndarray
    yt: np.ndarray


def simulate_tilde(
    p: ModelParams,
    moments: MeanTrajectory,
    *,
    n_paths: int = 1,
    dw: Optional[np.ndarray] = None,
    stream: Optional[RngStream] = None,
    steps: Optional[int] = None,
) -> TildePath:
    """EM paths of the centred Gaussian processes z1, z2 driven by the closure moments.

    `dw` has shape (steps, 2*n_paths): z1 lanes first, then z2 lanes.
    """
    if not moments.has_variances:
        raise ParameterError("tilde paths need a moment trajectory with variances")
    steps = p.steps if steps is None else steps
    if steps * p.dt > moments.horizon + 1e-9 * max(moments.horizon, 1.0):
        raise ParameterError(f"horizon {steps * p.dt:g} exceeds the moment trajectory (T={moments.horizon:g})")
    if dw is None:
        stream = stream or derive_stream(p.seed, TILDE, 0)
        dw = brownian_increments(stream, steps, p.dt, range(2 * n_paths))
    dw = np.asarray(dw, dtype=np.float64)
    if dw.shape != (steps, 2 * n_paths):
        raise ParameterError(f"Brownian path has shape {dw.shape}, expected {(steps, 2 * n_paths)}")

    times = p.dt * np.arange(steps + 1)
    src = moments.times
    m1, m2 = np.interp(times, src, moments.m1), np.interp(times, src, moments.m2)
    v1, v2 = np.interp(times, src, moments.v1), np.interp(times, src, moments.v2)
    c1 = -3.0 * v1 - 3.0 * m1 * m1 + 1.0 - p.alpha * p.theta11 - (1.0 - p.alpha) * p.theta12
    c2 = -3.0 * v2 - 3.0 * m2 * m2 + 1.0 - p.alpha * p.theta21 - (1.0 - p.alpha) * p.theta22

    z1 = np.zeros((steps + 1, n_paths))
    z2 = np.zeros((steps + 1, n_paths))
    for k in range(steps):
        z1[k + 1] = z1[k] + p.dt * c1[k] * z1[k] + dw[k, :n_paths]
        z2[k + 1] = z2[k] + p.dt * c2[k] * z2[k] + dw[k, n_paths:]
    return TildePath(
        times=times,
        z1=z1,
        z2=z2,
        xt=m1[:, None] + p.sigma * z1,
        yt=m2[:, None] + p.sigma * z2,
    )


def tilde_error(
    p: ModelParams,
    sigmas: Sequence[float] = (0.025, 0.05, 0.1, 0.2),
    replicas: int = 1000,
    T: float = 1.0,
    *,
    x0: float = 0.8,
    y0: float = 0.8,
    picard_tol: float = 1e-7,
    mc_copies: Optional[int] = None,
) -> TildeErrorReport:
    """Shared-path sup-error between the limiting pair and its Gaussian approximation.

    Both sides use the same explicit step so the comparison isolates the closure error;
    the same Brownian increments are reused for every sigma.
    """
    if replicas < 1:
        raise ParameterError("replicas must be >= 1")
    steps = int(round(T / p.dt))
    ic = InitialCondition.uniform_value(x0, y0)
    dw = brownian_increments(derive_stream(p.seed, TILDE, 0), steps, p.dt, range(2 * replicas))
    errors, stderrs = [], []
    for sigma in sigmas:
        ps = p.updated(sigma=float(sigma), steps=steps)
        moments = integrate_moments(MomentState(x0, y0, 0.0, 0.0), ps, T, dt_ode=ps.dt, sample_stride=1, method="euler")
        means = picard_means(ps, ic, tol=picard_tol, mc_copies=mc_copies or replicas, T=T, antithetic=True)
        lim = simulate_limiting_pair(
            ps, means, x0=np.full(replicas, x0), y0=np.full(replicas, y0), dw=dw, steps=steps
        )
        til = simulate_tilde(ps, moments, n_paths=replicas, dw=dw, steps=steps)
        sup = np.max(np.abs(lim.x - til.xt) + np.abs(lim.y - til.yt), axis=0)
        errors.append(float(np.mean(sup)))
        stderrs.append(float(np.std(sup, ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0)
        logger.info("[Tilde] sigma=%g mean sup-error %.4e", sigma, errors[-1])
    slope = float(np.polyfit(np.log(sigmas), np.log(errors), 1)[0]) if len(sigmas) > 1 else float("nan")
    return TildeErrorReport(
        sigmas=[float(s) for s in sigmas], errors=errors, stderrs=stderrs, fitted_slope=slope, replicas=replicas
    )


def write_tilde_csv(path: Union[str, Path], report: TildeErrorReport) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["sigma,mean_error,stderr"] + [
        f"{s!r},{e!r},{d!r}" for s, e, d in zip(report.sigmas, report.errors, report.stderrs)
    ]
    path.write_text("\n".join(lines) + "\n")


__all__ = [
    "MomentState",
    "moment_rhs",
    "quadrature_moment_rhs",
    "moment_jacobian",
    "integrate_moments",
    "is_reference_regime",
    "hopf_equilibrium",
    "hopf_equilibrium_closed_form",
    "hopf_eigenvalues_closed_form",
    "hopf_eigenvalues",
    "HopfReport",
    "find_sigma_c",
    "hopf_scan",
    "write_hopf_csv",
    "TildePath",
    "simulate_tilde",
    "tilde_error",
    "write_tilde_csv",
]
