from __future__ import annotations

from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from frustrated_diffusions.core.errors import ParameterError

UINT64_MAX = 2**64 - 1


# ── Model parameters ─────────────────────────────────────────────────────────

class ModelParams(BaseModel):
    """Model and discretization constants of the two-population system.

    A = (1-alpha)*theta12 and B = -alpha*theta21 are derived, never stored.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n1: Optional[int] = Field(default=None, ge=1, description="particles in population 1")
    n2: Optional[int] = Field(default=None, ge=1, description="particles in population 2")
    alpha: float = Field(default=0.5, ge=0, le=1, description="fraction N1/N")
    theta11: float = Field(default=8.0, description="intra-population coupling, population 1")
    theta12: float = Field(default=4.0, description="coupling of population 1 to the mean of population 2")
    theta21: float = Field(default=-5.0, description="coupling of population 2 to the mean of population 1")
    theta22: float = Field(default=8.0, description="intra-population coupling, population 2")
    sigma: float = Field(default=0.5, ge=0, description="noise intensity")
    dt: float = Field(default=0.005, gt=0, description="time step")
    steps: int = Field(default=200_000, ge=1, description="number of time steps")
    seed: int = Field(default=0, ge=0, le=UINT64_MAX, description="64-bit RNG seed")

    @model_validator(mode="before")
    @classmethod
    def _fill_alpha(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("alpha") is None:
            data = {k: v for k, v in data.items() if k != "alpha"}
            n1, n2 = data.get("n1"), data.get("n2")
            if n1 is not None and n2 is not None:
                data["alpha"] = int(n1) / (int(n1) + int(n2))
        return data

    @model_validator(mode="after")
    def _check_alpha(self) -> "ModelParams":
        if self.n1 is not None and self.n2 is not None:
            expected = self.n1 / (self.n1 + self.n2)
            if abs(self.alpha - expected) > 1e-12:
                raise ValueError(
                    f"alpha={self.alpha} inconsistent with n1={self.n1}, n2={self.n2} (expected {expected})"
                )
        return self

    @property
    def A(self) -> float:
        return (1.0 - self.alpha) * self.theta12

    @property
    def B(self) -> float:
        return -self.alpha * self.theta21

    @property
    def gamma(self) -> float:
        return self.A - self.B

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    @property
    def n(self) -> int:
        if self.n1 is None or self.n2 is None:
            raise ParameterError("particle counts n1, n2 are not set")
        return self.n1 + self.n2

    def updated(self, **changes: Any) -> "ModelParams":
        """Validated copy with `changes` applied (alpha re-derived when counts change)."""
        data = self.model_dump()
        if ("n1" in changes or "n2" in changes) and "alpha" not in changes:
            data.pop("alpha")
        data.update(changes)
        return validate_params(data)

    @classmethod
    def from_coupling(cls, A: float, B: float, alpha: float = 0.5, **fields: Any) -> "ModelParams":
        """Build parameters from the (A, B) parameterization of the noiseless system."""
        if not 0.0 < alpha < 1.0:
            raise ParameterError(f"(A, B) parameterization needs 0 < alpha < 1, got {alpha}")
        return validate_params(
            {**fields, "alpha": alpha, "theta12": A / (1.0 - alpha), "theta21": -B / alpha}
        )


def validate_params(raw: "ModelParams | dict[str, Any]") -> ModelParams:
    """Normalize raw input into ModelParams; pydantic failures become ParameterError."""
    if isinstance(raw, ModelParams):
        return raw
    try:
        return ModelParams.model_validate(raw)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'params'}: {err['msg']}" for err in e.errors()
        )
        raise ParameterError(f"invalid model parameters: {problems}") from e


class RngStream(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=0, ge=0, le=UINT64_MAX)
    stream_id: int = Field(default=0, ge=0, le=UINT64_MAX)


# ── Initial conditions ───────────────────────────────────────────────────────

class PopulationLaw(BaseModel):
    """Law of one population's initial positions."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["point", "uniform", "normal"] = "point"
    value: float = 0.8
    low: float = 0.7
    high: float = 0.9
    mean: float = 0.8
    std: float = Field(default=0.05, ge=0)

    @model_validator(mode="after")
    def _check_bounds(self) -> "PopulationLaw":
        if self.kind == "uniform" and not self.low < self.high:
            raise ValueError(f"uniform law needs low < high, got [{self.low}, {self.high}]")
        return self

    @property
    def expectation(self) -> float:
        if self.kind == "point":
            return self.value
        if self.kind == "uniform":
            return 0.5 * (self.low + self.high)
        return self.mean


class InitialCondition(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Literal["uniform-value", "iid-law"] = "uniform-value"
    x0: float = 0.8
    y0: float = 0.8
    law_x: Optional[PopulationLaw] = None
    law_y: Optional[PopulationLaw] = None

    @model_validator(mode="after")
    def _check_mode(self) -> "InitialCondition":
        if self.mode == "iid-law" and (self.law_x is None or self.law_y is None):
            raise ValueError("iid-law mode needs law_x and law_y")
        if not (np.isfinite(self.x0) and np.isfinite(self.y0)):
            raise ValueError("initial values must be finite")
        return self

    @classmethod
    def uniform_value(cls, x0: float = 0.8, y0: float = 0.8) -> "InitialCondition":
        return cls(mode="uniform-value", x0=x0, y0=y0)

    @classmethod
    def iid_uniform(cls, low: float = 0.7, high: float = 0.9) -> "InitialCondition":
        law = PopulationLaw(kind="uniform", low=low, high=high)
        return cls(mode="iid-law", law_x=law, law_y=law)

    @property
    def is_deterministic(self) -> bool:
        if self.mode == "uniform-value":
            return True
        return self.law_x.kind == "point" and self.law_y.kind == "point"  # type: ignore[union-attr]

    @property
    def expectation(self) -> tuple[float, float]:
        if self.mode == "uniform-value":
            return self.x0, self.y0
        return self.law_x.expectation, self.law_y.expectation  # type: ignore[union-attr]


class DensitySpec(BaseModel):
    """Initial densities for the Fokker-Planck solver."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["gaussian", "uniform"] = "gaussian"
    center1: float = 0.8
    center2: float = 0.8
    width: float = Field(default=0.05, gt=0, description="std (gaussian) or half-width (uniform)")

    def mirrored(self) -> "DensitySpec":
        return self.model_copy(update={"center1": -self.center1, "center2": -self.center2})


# ── Zero-noise analysis ──────────────────────────────────────────────────────

EquilibriumKind = Literal[
    "unstable-node",
    "stable-node",
    "saddle",
    "stable-spiral",
    "unstable-spiral",
    "degenerate",
    "center-candidate",
]

Regime = Literal["B<A-1", "B=A-1", "A-1<B<A+2", "B=A+2", "B>A+2"]


class Equilibrium(BaseModel):
    model_config = ConfigDict(frozen=True)

    point: tuple[float, float]
    beta: Optional[float] = None
    eigenvalues: list[tuple[float, float]] = Field(description="(real, imag) pairs")
    kind: EquilibriumKind

    @property
    def eigs(self) -> np.ndarray:
        return np.array([complex(re, im) for re, im in self.eigenvalues])


class EquilibriumReport(BaseModel):
    A: float
    B: float
    gamma: float
    regime: Regime
    in_hypothesis: bool = Field(description="A > 1 and B > A - 1")
    equilibria: list[Equilibrium]

    def kinds(self) -> list[str]:
        return [e.kind for e in self.equilibria]


# ── Analysis reports ─────────────────────────────────────────────────────────

class PeriodEstimate(BaseModel):
    method: Literal["poincare", "dft"]
    mean_period: float = Field(gt=0)
    std_period: float = Field(ge=0)
    n_events: int = Field(ge=1, description="section crossings (poincare) or replicas (dft)")
    pooled_std: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check_events(self) -> "PeriodEstimate":
        if self.method == "poincare" and self.n_events < 2:
            raise ValueError("a Poincare estimate needs at least two crossings")
        return self


class ChaosReport(BaseModel):
    n_values: list[int]
    errors: list[float]
    stderrs: list[float]
    fitted_slope: float
    replicas: int = Field(ge=1)

    @field_validator("n_values")
    @classmethod
    def _increasing(cls, v: list[int]) -> list[int]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("n_values must be strictly increasing")
        return v

    @field_validator("errors")
    @classmethod
    def _positive(cls, v: list[float]) -> list[float]:
        if any(e <= 0 for e in v):
            raise ValueError("chaos errors must be positive")
        return v


class TildeErrorReport(BaseModel):
    sigmas: list[float]
    errors: list[float]
    stderrs: list[float]
    fitted_slope: float
    replicas: int = Field(ge=1)


# ── Presets / outputs ────────────────────────────────────────────────────────

PipelineName = Literal[
    "table1",
    "noise-regimes",
    "equilibria",
    "fokker-planck",
    "moment-series",
    "moment-regimes",
    "hopf",
    "chaos",
    "tilde",
    "closure",
]


class ExperimentPreset(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    description: str
    pipeline: PipelineName
    params: ModelParams
    options: dict[str, Any] = Field(default_factory=dict)
    desk: dict[str, Any] = Field(default_factory=dict, description="overrides at desk scale")
    full: dict[str, Any] = Field(default_factory=dict, description="overrides at full scale")
    outputs: list[str] = Field(default_factory=list, description="files written under the run directory")

    def resolved(self, scale: Literal["desk", "full"]) -> dict[str, Any]:
        return {**self.options, **(self.desk if scale == "desk" else self.full)}


class RunManifest(BaseModel):
    preset: str
    scale: Literal["desk", "full"]
    seed: int
    params: dict[str, Any]
    options: dict[str, Any]
    versions: dict[str, str]
    wall_time_s: float
    outputs: list[str]
    summary: dict[str, Any] = Field(default_factory=dict)


class PlotSpec(BaseModel):
    kind: Literal["trajectory", "phase-plane", "spectrum", "eigenvalues", "density"]
    title: Optional[str] = None
    width_in: float = Field(default=6.0, gt=0)
    height_in: float = Field(default=4.0, gt=0)


__all__ = [
    "ModelParams",
    "validate_params",
    "RngStream",
    "PopulationLaw",
    "InitialCondition",
    "DensitySpec",
    "Equilibrium",
    "EquilibriumReport",
    "PeriodEstimate",
    "ChaosReport",
    "TildeErrorReport",
    "ExperimentPreset",
    "RunManifest",
    "PlotSpec",
]
