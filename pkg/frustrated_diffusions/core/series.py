# frustrated_diffusions/core/series.py
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from frustrated_diffusions.core.errors import ParameterError, SeriesFormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_BASE_COLUMNS = ["t", "m1", "m2"]
_VAR_COLUMNS = ["v1", "v2"]


@dataclass(frozen=True)
class MeanTrajectory:
    """Uniformly sampled (m1, m2) series, optionally with variances (v1, v2)."""

    t0: float
    dt_sample: float
    m1: np.ndarray
    m2: np.ndarray
    v1: Optional[np.ndarray] = None
    v2: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if not self.dt_sample > 0:
            raise ParameterError(f"dt_sample must be positive, got {self.dt_sample}")
        for name in ("m1", "m2", "v1", "v2"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, np.asarray(value, dtype=np.float64))
        if (self.v1 is None) != (self.v2 is None):
            raise ParameterError("v1 and v2 must be given together")
        lengths = {len(s) for s in (self.m1, self.m2, self.v1, self.v2) if s is not None}
        if len(lengths) > 1:
            raise ParameterError(f"trajectory columns have different lengths: {sorted(lengths)}")

    def __len__(self) -> int:
        return len(self.m1)

    @property
    def has_variances(self) -> bool:
        return self.v1 is not None

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt_sample * np.arange(len(self))

    @property
    def horizon(self) -> float:
        return self.t0 + self.dt_sample * max(len(self) - 1, 0)

    def after(self, t_start: float) -> "MeanTrajectory":
        """Samples with time >= t_start, as a new trajectory."""
        i0 = max(int(np.ceil((t_start - self.t0) / self.dt_sample - 1e-9)), 0)
        return MeanTrajectory(
            t0=self.t0 + i0 * self.dt_sample,
            dt_sample=self.dt_sample,
            m1=self.m1[i0:],
            m2=self.m2[i0:],
            v1=None if self.v1 is None else self.v1[i0:],
            v2=None if self.v2 is None else self.v2[i0:],
        )

    def thinned(self, stride: int) -> "MeanTrajectory":
        if stride < 1:
            raise ParameterError(f"stride must be >= 1, got {stride}")
        return MeanTrajectory(
            t0=self.t0,
            dt_sample=self.dt_sample * stride,
            m1=self.m1[::stride],
            m2=self.m2[::stride],
            v1=None if self.v1 is None else self.v1[::stride],
            v2=None if self.v2 is None else self.v2[::stride],
        )


def _fmt(x: float) -> str:
    return repr(float(x))


def write_series(path: PathLike, traj: MeanTrajectory) -> None:
    """CSV `t,m1,m2[,v1,v2]`, shortest round-trip reals, LF endings.

    A leading `# t0=... dt_sample=...` comment keeps the time base exact.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = _BASE_COLUMNS + (_VAR_COLUMNS if traj.has_variances else [])
    data = [traj.times, traj.m1, traj.m2]
    if traj.has_variances:
        data += [traj.v1, traj.v2]
    with path.open("w", newline="") as fh:
        fh.write(f"# t0={_fmt(traj.t0)} dt_sample={_fmt(traj.dt_sample)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in zip(*data):
            writer.writerow([_fmt(v) for v in row])


def _parse_meta(line: str) -> dict[str, float]:
    meta: dict[str, float] = {}
    for token in line.lstrip("#").split():
        key, sep, value = token.partition("=")
        if sep:
            meta[key] = float(value)
    return meta


def read_series(path: PathLike) -> MeanTrajectory:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise SeriesFormatError(f"cannot read {path}: {e}") from e

    meta: dict[str, float] = {}
    while lines and lines[0].startswith("#"):
        try:
            meta.update(_parse_meta(lines.pop(0)))
        except ValueError as e:
            raise SeriesFormatError(f"{path}: malformed metadata line: {e}") from e
    if not lines:
        raise SeriesFormatError(f"{path}: missing header")

    header = [h.strip() for h in lines[0].split(",")]
    if header not in (_BASE_COLUMNS, _BASE_COLUMNS + _VAR_COLUMNS):
        raise SeriesFormatError(f"{path}: malformed header {lines[0]!r}")

    cols: list[list[float]] = [[] for _ in header]
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != len(header):
            raise SeriesFormatError(
                f"{path}:{lineno}: expected {len(header)} columns, found {len(fields)}"
            )
        try:
            for col, value in zip(cols, fields):
                col.append(float(value))
        except ValueError as e:
            raise SeriesFormatError(f"{path}:{lineno}: {e}") from e

    t = np.asarray(cols[0])
    t0 = meta.get("t0", float(t[0]) if t.size else 0.0)
    dt_sample = meta.get("dt_sample")
    if dt_sample is None:
        if t.size < 2:
            raise SeriesFormatError(f"{path}: cannot infer dt_sample from fewer than two rows")
        dt_sample = float((t[-1] - t[0]) / (t.size - 1))

    try:
        return MeanTrajectory(
            t0=t0,
            dt_sample=dt_sample,
            m1=np.asarray(cols[1]),
            m2=np.asarray(cols[2]),
            v1=np.asarray(cols[3]) if len(cols) == 5 else None,
            v2=np.asarray(cols[4]) if len(cols) == 5 else None,
        )
    except ParameterError as e:
        raise SeriesFormatError(f"{path}: {e}") from e


def load_params_file(path: PathLike) -> dict[str, Any]:
    """Flat `key=value` file -> raw dict for ModelParams (values stay strings)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParameterError(f"cannot read config {path}: {e}") from e
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ParameterError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key = key.strip()
        if key in out:
            logger.warning("[Config] %s:%d overrides earlier %s", path, lineno, key)
        out[key] = value.strip()
    return out


__all__ = ["MeanTrajectory", "write_series", "read_series", "load_params_file"]
