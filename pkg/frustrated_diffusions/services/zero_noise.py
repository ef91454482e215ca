# frustrated_diffusions/services/zero_noise.py
"""Noiseless planar dynamics in the (A, B) parameterization: equilibria, their
classification and phase-portrait sampling."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from numpy.polynomial import Polynomial

from frustrated_diffusions.core.errors import BetaDomainError, ConvergenceError, ParameterError
from frustrated_diffusions.schemas import Equilibrium, EquilibriumReport, Regime
from frustrated_diffusions.services.ode import rk4_integrate

logger = logging.getLogger(__name__)

REGIME_TOL = 1e-9
RESIDUAL_TOL = 1e-10
ROOT_FLOOR = 1e-12
POLISH_MAX_COND = 1e6


def vector_field(x, y, A: float, B: float):
    """(dx, dy) of the noiseless system; works on scalars and arrays."""
    dx = -(x * x * x) + x - A * (x - y)
    dy = -(y * y * y) + y - B * (x - y)
    return dx, dy


def jacobian(x: float, y: float, A: float, B: float) -> np.ndarray:
    return np.array([[-3.0 * x * x + 1.0 - A, A], [-B, -3.0 * y * y + 1.0 + B]])


def beta_domain_floor(A: float, B: float) -> float:
    return max((A - 1.0) / A, B / (1.0 + B))


def beta_map(beta: float, A: float, B: float) -> float:
    """f(beta) of the fixed-point equation beta = f(beta)."""
    if beta == 0:
        raise BetaDomainError(beta, A, B, "beta must be nonzero")
    den = 1.0 - A * (1.0 - beta)
    if den <= 0:
        raise BetaDomainError(beta, A, B, "non-positive denominator 1 - A(1 - beta)")
    rad = (1.0 - B * (1.0 - beta) / beta) / den
    if rad < 0:
        raise BetaDomainError(beta, A, B, "negative radicand")
    return math.sqrt(rad)


def beta_critical_points(A: float, B: float) -> tuple[complex, complex]:
    """Critical points beta_-, beta_+ of f (complex when B < A - 1)."""
    disc = complex(A * B * (B - A + 1.0))
    root = disc**0.5
    den = A * (1.0 + B)
    return (A * B - root) / den, (A * B + root) / den


def regime_of(A: float, B: float, tol: float = REGIME_TOL) -> Regime:
    if abs(B - (A - 1.0)) < tol:
        return "B=A-1"
    if abs(B - (A + 2.0)) < tol:
        return "B=A+2"
    if B < A - 1.0:
        return "B<A-1"
    if B < A + 2.0:
        return "A-1<B<A+2"
    return "B>A+2"


def classify(eigs: np.ndarray, A: float, B: float) -> str:
    scale = 1e-9 * (1.0 + abs(A) + abs(B))
    if np.any(np.abs(eigs) < scale):
        return "degenerate"
    re = eigs.real
    if np.any(np.abs(eigs.imag) > scale):
        if np.all(re < -scale):
            return "stable-spiral"
        if np.all(re > scale):
            return "unstable-spiral"
        return "center-candidate"
    if np.all(re < 0):
        return "stable-node"
    if np.all(re > 0):
        return "unstable-node"
    return "saddle"


def _equilibrium(point: tuple[float, float], eigs: np.ndarray, A: float, B: float, beta: Optional[float]) -> Equilibrium:
    order = np.lexsort((eigs.imag, eigs.real))
    eigs = eigs[order]
    return Equilibrium(
        point=(float(point[0]), float(point[1])),
        beta=beta,
        eigenvalues=[(float(e.real), float(e.imag)) for e in eigs],
        kind=classify(eigs, A, B),  # type: ignore[arg-type]
    )


def deflated_beta_polynomial(A: float, B: float) -> Polynomial:
    """Q(beta) = A beta^3 + beta^2 + beta - B.

    Clearing denominators in beta = f(beta) gives
    A beta^4 + (1 - A) beta^3 - (1 + B) beta + B = (beta - 1) Q(beta),
    so the off-diagonal equilibria are the admissible roots of Q.
    """
    return Polynomial([-B, 1.0, 1.0, A])


def _beta_roots(A: float, B: float) -> list[float]:
    """Real roots of Q with beta > 0 that give real, nonzero x and y."""
    roots: list[float] = []
    for r in deflated_beta_polynomial(A, B).roots():
        if abs(r.imag) > 1e-12 * max(1.0, abs(r.real)):
            continue
        beta = float(r.real)
        if beta <= 0:
            continue
        if 1.0 - A * (1.0 - beta) <= ROOT_FLOOR or beta - B * (1.0 - beta) <= ROOT_FLOOR:
            continue
        roots.append(beta)
    return sorted(roots)


def _polish(x: float, y: float, A: float, B: float) -> tuple[float, float]:
    # Newton on the planar field; stops where the Jacobian is close to singular
    for _ in range(5):
        fx, fy = vector_field(x, y, A, B)
        if max(abs(fx), abs(fy)) < 1e-15:
            break
        J = jacobian(x, y, A, B)
        if np.linalg.cond(J) > POLISH_MAX_COND:
            break
        step = np.linalg.solve(J, [fx, fy])
        x, y = x - float(step[0]), y - float(step[1])
    return x, y


def find_equilibria(A: float, B: float) -> EquilibriumReport:
    """Equilibria of the noiseless system with Jacobian classification."""
    if A <= 0 or B <= 0:
        raise ParameterError(f"equilibrium analysis needs A > 0 and B > 0, got A={A}, B={B}")
    regime = regime_of(A, B)
    in_hypothesis = A > 1.0 and B > A - 1.0
    if not in_hypothesis:
        logger.warning("[Equilibria] A=%g, B=%g outside A>1, B>A-1: best-effort enumeration", A, B)

    found: list[Equilibrium] = [
        _equilibrium((0.0, 0.0), np.array([1.0, 1.0 - A + B], dtype=complex), A, B, None),
    ]
    diag = np.array([-2.0, 0.0 if regime == "B=A+2" else -2.0 - A + B], dtype=complex)
    found.append(_equilibrium((1.0, 1.0), diag, A, B, 1.0))
    found.append(_equilibrium((-1.0, -1.0), diag, A, B, 1.0))

    if regime != "B=A+2":
        for beta in _beta_roots(A, B):
            xbar = math.sqrt(1.0 - A * (1.0 - beta))
            x, y = _polish(xbar, beta * xbar, A, B)
            residual = max(abs(v) for v in vector_field(x, y, A, B))
            if residual >= RESIDUAL_TOL:
                raise ConvergenceError(f"equilibrium at beta={beta!r} has residual {residual:.2e}")
            eigs = np.linalg.eigvals(jacobian(x, y, A, B)).astype(complex)
            found.append(_equilibrium((x, y), eigs, A, B, beta))
            found.append(_equilibrium((-x, -y), eigs, A, B, beta))

    logger.debug("[Equilibria] A=%g B=%g regime %s: %d equilibria", A, B, regime, len(found))
    return EquilibriumReport(
        A=A, B=B, gamma=A - B, regime=regime, in_hypothesis=in_hypothesis, equilibria=found
    )


@dataclass(frozen=True)
class FieldSample:
    xs: np.ndarray  # lattice, shape (res, res)
    ys: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    magnitude: np.ndarray  # rescaled to [0, 1]


def sample_field(
    A: float,
    B: float,
    window: tuple[float, float, float, float] = (-2.0, 2.0, -2.0, 2.0),
    resolution: int = 40,
) -> FieldSample:
    """Vector field on a resolution x resolution lattice over (xmin, xmax, ymin, ymax)."""
    if resolution < 1:
        raise ParameterError(f"resolution must be positive, got {resolution}")
    xmin, xmax, ymin, ymax = window
    xs, ys = np.meshgrid(np.linspace(xmin, xmax, resolution), np.linspace(ymin, ymax, resolution))
    dx, dy = vector_field(xs, ys, A, B)
    mag = np.hypot(dx, dy)
    peak = float(np.max(mag)) if mag.size else 0.0
    if peak > 0:
        mag = mag / peak
    return FieldSample(xs=xs, ys=ys, dx=dx, dy=dy, magnitude=mag)


def write_field_csv(path: Union[str, Path], field: FieldSample) -> None:
    """`x,y,dx,dy,magnitude`, one row per lattice point."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = (field.xs, field.ys, field.dx, field.dy, field.magnitude)
    rows = zip(*(c.ravel() for c in columns))
    lines = ["x,y,dx,dy,magnitude"] + [",".join(repr(float(v)) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def integrate_planar(
    start: np.ndarray,
    A: float,
    B: float,
    T: float,
    dt: float = 0.01,
    record_every: Optional[int] = None,
) -> np.ndarray:
    """RK4 paths of the planar system from each row of `start` (shape (n, 2)).

    Returns the final points, or the recorded path (samples, n, 2) if record_every is set.
    """
    start = np.atleast_2d(np.asarray(start, dtype=np.float64))

    def rhs(_t: float, z: np.ndarray) -> np.ndarray:
        dx, dy = vector_field(z[:, 0], z[:, 1], A, B)
        return np.stack((dx, dy), axis=1)

    steps = int(round(T / dt))
    path = rk4_integrate(rhs, start, dt, steps, record_every=record_every or steps)
    return path[-1] if record_every is None else path


__all__ = [
    "vector_field",
    "jacobian",
    "beta_map",
    "beta_domain_floor",
    "beta_critical_points",
    "deflated_beta_polynomial",
    "regime_of",
    "classify",
    "find_equilibria",
    "FieldSample",
    "sample_field",
    "write_field_csv",
    "integrate_planar",
]
