# frustrated_diffusions/core/errors.py
from __future__ import annotations

from typing import Optional


class FrustratedDiffusionsError(Exception):
    """Base error. `exit_code` is what the CLI returns for it."""

    exit_code: int = 1


# ── Validation (exit 2) ──────────────────────────────────────────────────────

class ParameterError(FrustratedDiffusionsError, ValueError):
    exit_code = 2


class SeriesFormatError(ParameterError):
    pass


class UnknownPresetError(ParameterError):
    pass


class BetaDomainError(ParameterError):
    def __init__(self, beta: float, A: float, B: float, reason: str):
        super().__init__(f"beta={beta!r} outside the admissible domain for A={A}, B={B}: {reason}")
        self.beta = beta


# ── Numerical divergence (exit 3) ────────────────────────────────────────────

class DivergenceError(FrustratedDiffusionsError):
    exit_code = 3

    def __init__(self, message: str, step: Optional[int] = None, time: Optional[float] = None):
        where = ""
        if step is not None:
            where = f" at step {step}"
            if time is not None:
                where += f" (t={time:.6g})"
        super().__init__(message + where)
        self.step = step
        self.time = time


class SchemeError(DivergenceError):
    pass


# ── Analysis failures (exit 4) ───────────────────────────────────────────────

class AnalysisError(FrustratedDiffusionsError):
    exit_code = 4


class NoRhythmError(AnalysisError):
    def __init__(self, n_crossings: int):
        super().__init__(f"no rhythm detected ({n_crossings} section crossing(s) after burn-in)")
        self.n_crossings = n_crossings


class FlatSignalError(AnalysisError):
    pass


class ConvergenceError(AnalysisError):
    def __init__(self, message: str, residual: Optional[float] = None):
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class NoSignChangeError(AnalysisError):
    def __init__(self, lo: float, hi: float, f_lo: float, f_hi: float):
        super().__init__(
            f"no sign change in bracket [{lo}, {hi}]: f(lo)={f_lo:.6g}, f(hi)={f_hi:.6g}"
        )
        self.bracket = (lo, hi)


class HopfConsistencyError(AnalysisError):
    pass


__all__ = [
    "FrustratedDiffusionsError",
    "ParameterError",
    "SeriesFormatError",
    "UnknownPresetError",
    "BetaDomainError",
    "DivergenceError",
    "SchemeError",
    "AnalysisError",
    "NoRhythmError",
    "FlatSignalError",
    "ConvergenceError",
    "NoSignChangeError",
    "HopfConsistencyError",
]
