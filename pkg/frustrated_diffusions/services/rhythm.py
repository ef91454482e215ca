# frustrated_diffusions/services/rhythm.py
"""Period estimation for the mean dynamics: Poincare-section return times on
{m2 = 0, m1 > 0} and averaged DFT spectral peaks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np

from frustrated_diffusions.core.errors import FlatSignalError, NoRhythmError, ParameterError
from frustrated_diffusions.core.series import MeanTrajectory
from frustrated_diffusions.schemas import PeriodEstimate
from frustrated_diffusions.services.parallel import map_ordered

logger = logging.getLogger(__name__)

BURN_IN_FRACTION = 0.1


@dataclass(frozen=True)
class SpectrumReport:
    frequencies: np.ndarray
    power: np.ndarray  # modulus averaged over replicas
    peak_frequency: float

    @property
    def bin_width(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    @property
    def peak_period(self) -> float:
        return 1.0 / self.peak_frequency


def _after_burn_in(traj: MeanTrajectory, burn_in: Optional[float]) -> MeanTrajectory:
    if burn_in is None:
        burn_in = traj.t0 + BURN_IN_FRACTION * (traj.horizon - traj.t0)
    if burn_in < 0:
        raise ParameterError(f"burn_in must be >= 0, got {burn_in}")
    if burn_in >= traj.horizon:
        raise ParameterError(f"burn_in {burn_in:g} leaves nothing of a trajectory ending at {traj.horizon:g}")
    return traj.after(burn_in)


def crossing_times(traj: MeanTrajectory, burn_in: Optional[float] = None) -> np.ndarray:
    """Times where m2 passes from positive to non-positive with m1 > 0 (linear interpolation)."""
    seg = _after_burn_in(traj, burn_in)
    m1, m2, t = seg.m1, seg.m2, seg.times
    idx = np.nonzero((m2[:-1] > 0) & (m2[1:] <= 0))[0]
    frac = m2[idx] / (m2[idx] - m2[idx + 1])
    m1_cross = m1[idx] + frac * (m1[idx + 1] - m1[idx])
    keep = m1_cross > 0
    if np.any(~keep):
        logger.debug("[Rhythm] ignored %d crossing(s) with m1 <= 0", int(np.sum(~keep)))
    return t[idx[keep]] + frac[keep] * seg.dt_sample


def count_returns(traj: MeanTrajectory, burn_in: Optional[float] = None) -> int:
    return int(crossing_times(traj, burn_in).size)


def poincare_periods(traj: MeanTrajectory, burn_in: Optional[float] = None) -> PeriodEstimate:
    """Mean and spread of the return times to the section after `burn_in` (time units).

    burn_in defaults to the first tenth of the trajectory.
    """
    times = crossing_times(traj, burn_in)
    if times.size < 2:
        raise NoRhythmError(int(times.size))
    intervals = np.diff(times)
    std = float(np.std(intervals, ddof=1)) if intervals.size > 1 else 0.0
    estimate = PeriodEstimate(
        method="poincare", mean_period=float(np.mean(intervals)), std_period=std, n_events=int(times.size)
    )
    logger.debug("[Rhythm] %d returns, period %.4f +/- %.4f", times.size, estimate.mean_period, std)
    return estimate


def _spectrum(signal: np.ndarray) -> np.ndarray:
    centred = signal - np.mean(signal)
    if np.max(np.abs(centred)) <= 1e-12 * max(1.0, float(np.max(np.abs(signal)))):
        raise FlatSignalError("signal is flat after mean removal; no spectral peak")
    return np.abs(np.fft.rfft(centred))


def dft_period(
    trajs: Sequence[MeanTrajectory],
    burn_in: Optional[float] = None,
    *,
    channel: Literal["m1", "m2"] = "m2",
    threads: Optional[int] = None,
) -> tuple[SpectrumReport, PeriodEstimate]:
    """Average the DFT modulus of `channel` over replicas; the period is 1/peak frequency.

    The zero bin is excluded and no window is applied. std_period is the spread of the
    per-replica peak periods.
    """
    if not trajs:
        raise ParameterError("dft_period needs at least one trajectory")
    segments = [_after_burn_in(tr, burn_in) for tr in trajs]
    lengths = {len(s) for s in segments}
    steps = {s.dt_sample for s in segments}
    if len(lengths) != 1 or len(steps) != 1:
        raise ParameterError("all trajectories must share length and sampling interval")
    n, dt = lengths.pop(), steps.pop()
    if n < 4:
        raise ParameterError(f"{n} samples are too few for a spectrum")

    moduli = np.asarray(map_ordered(lambda s: _spectrum(getattr(s, channel)), segments, threads))
    freqs = np.fft.rfftfreq(n, dt)
    power = np.mean(moduli, axis=0)
    peak = int(np.argmax(power[1:])) + 1
    per_replica = 1.0 / freqs[np.argmax(moduli[:, 1:], axis=1) + 1]
    std = float(np.std(per_replica, ddof=1)) if per_replica.size > 1 else 0.0

    report = SpectrumReport(frequencies=freqs, power=power, peak_frequency=float(freqs[peak]))
    estimate = PeriodEstimate(method="dft", mean_period=report.peak_period, std_period=std, n_events=len(segments))
    logger.info("[Rhythm] DFT over %d replica(s): period %.4f (bin %.2e)", len(segments), report.peak_period, report.bin_width)
    return report, estimate


def summarize_periods(estimates: Sequence[PeriodEstimate]) -> PeriodEstimate:
    """Pool per-run Poincare estimates.

    std_period is the spread of the per-run means; pooled_std is the interval spread
    over all runs together.
    """
    if not estimates:
        raise ParameterError("nothing to summarize")
    methods = {e.method for e in estimates}
    if len(methods) != 1:
        raise ParameterError(f"cannot pool estimates of different methods: {sorted(methods)}")
    means = np.array([e.mean_period for e in estimates])
    grand = float(np.mean(means))
    weights = np.array([max(e.n_events - 1, 1) for e in estimates], dtype=np.float64)
    second = np.array([e.std_period**2 + (e.mean_period - grand) ** 2 for e in estimates])
    pooled = math.sqrt(float(np.sum(weights * second) / np.sum(weights)))
    return PeriodEstimate(
        method=methods.pop(),
        mean_period=grand,
        std_period=float(np.std(means, ddof=1)) if means.size > 1 else 0.0,
        n_events=int(sum(e.n_events for e in estimates)),
        pooled_std=pooled,
    )


def write_spectrum_csv(path: Union[str, Path], report: SpectrumReport) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["freq,power"] + [f"{float(f)!r},{float(w)!r}" for f, w in zip(report.frequencies, report.power)]
    path.write_text("\n".join(lines) + "\n")


def read_spectrum_csv(path: Union[str, Path]) -> SpectrumReport:
    path = Path(path)
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise ParameterError(f"cannot read spectrum {path}: {e}") from e
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise ParameterError(f"{path}: expected columns freq,power")
    peak = int(np.argmax(data[1:, 1])) + 1
    return SpectrumReport(frequencies=data[:, 0], power=data[:, 1], peak_frequency=float(data[peak, 0]))


__all__ = [
    "SpectrumReport",
    "crossing_times",
    "count_returns",
    "poincare_periods",
    "dft_period",
    "summarize_periods",
    "write_spectrum_csv",
    "read_spectrum_csv",
]
