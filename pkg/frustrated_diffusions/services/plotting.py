# frustrated_diffusions/services/plotting.py
"""Static SVG rendering of run outputs. Identical inputs give byte-identical files."""
from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from frustrated_diffusions.core.errors import SeriesFormatError  # noqa: E402
from frustrated_diffusions.schemas import EquilibriumReport, PlotSpec  # noqa: E402
from frustrated_diffusions.services.zero_noise import FieldSample  # noqa: E402

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_RC = {
    "svg.hashsalt": "frustrated-diffusions",
    "svg.fonttype": "none",
    "path.simplify": False,
}

_COLUMNS = {
    "trajectory": ("t", "m1", "m2"),
    "phase-plane": ("m1", "m2"),
    "spectrum": ("freq", "power"),
    "eigenvalues": ("sigma", "re_l1", "im_l1", "l3", "l4"),
    "density": ("x", "q1", "q2"),
}

_MARKERS = {
    "stable-node": ("o", "black"),
    "unstable-node": ("o", "white"),
    "saddle": ("X", "tab:red"),
    "stable-spiral": ("s", "black"),
    "unstable-spiral": ("s", "white"),
    "center-candidate": ("D", "tab:orange"),
    "degenerate": ("^", "tab:purple"),
}


def read_columns(path: PathLike, required: Sequence[str] = ()) -> dict[str, np.ndarray]:
    """Numeric CSV with a header row; leading `#` lines are skipped."""
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    except OSError as e:
        raise SeriesFormatError(f"cannot read {path}: {e}") from e
    if not lines:
        raise SeriesFormatError(f"{path}: missing header")
    rows = list(csv.reader(lines))
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise SeriesFormatError(f"{path}: missing column(s) {missing} in header {header}")
    values: list[list[float]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SeriesFormatError(f"{path}:{lineno}: expected {len(header)} columns, found {len(row)}")
        try:
            values.append([float(v) for v in row])
        except ValueError as e:
            raise SeriesFormatError(f"{path}:{lineno}: {e}") from e
    table = np.asarray(values, dtype=np.float64).reshape(len(values), len(header))
    return {name: table[:, i] for i, name in enumerate(header)}


def _draw_trajectory(ax, data: dict[str, np.ndarray], label: str) -> None:
    ax.plot(data["t"], data["m1"], lw=0.8, label=f"m1 {label}".strip())
    ax.plot(data["t"], data["m2"], lw=0.8, label=f"m2 {label}".strip())
    if "v1" in data:
        ax.plot(data["t"], data["v1"], lw=0.6, ls="--", label=f"v1 {label}".strip())
        ax.plot(data["t"], data["v2"], lw=0.6, ls="--", label=f"v2 {label}".strip())
    ax.set_xlabel("t")


def _draw_phase(ax, data: dict[str, np.ndarray], label: str) -> None:
    ax.plot(data["m1"], data["m2"], lw=0.6, label=label or None)
    ax.set_xlabel("m1")
    ax.set_ylabel("m2")


def _draw_spectrum(ax, data: dict[str, np.ndarray], label: str) -> None:
    ax.plot(data["freq"][1:], data["power"][1:], lw=0.8, label=label or None)
    ax.set_xlabel("frequency")
    ax.set_ylabel("|DFT|")


def _draw_eigenvalues(ax, data: dict[str, np.ndarray], label: str) -> None:
    s = data["sigma"]
    ax.plot(s, data["re_l1"], label="Re l1,2")
    ax.plot(s, np.hypot(data["re_l1"], data["im_l1"]), ls=":", label="|l1,2|")
    ax.plot(s, data["l3"], ls="--", label="l3")
    ax.plot(s, data["l4"], ls="--", label="l4")
    ax.axhline(0.0, color="grey", lw=0.5)
    ax.set_xlabel("sigma")


def _draw_density(ax, data: dict[str, np.ndarray], label: str) -> None:
    ax.plot(data["x"], data["q1"], lw=0.8, label=f"q1 {label}".strip())
    ax.plot(data["x"], data["q2"], lw=0.8, label=f"q2 {label}".strip())
    ax.set_xlabel("x")


_DRAW = {
    "trajectory": _draw_trajectory,
    "phase-plane": _draw_phase,
    "spectrum": _draw_spectrum,
    "eigenvalues": _draw_eigenvalues,
    "density": _draw_density,
}


def _draw_field(ax, field: FieldSample) -> None:
    norm = np.hypot(field.dx, field.dy)
    norm[norm == 0] = 1.0
    ax.quiver(field.xs, field.ys, field.dx / norm, field.dy / norm, field.magnitude, cmap="viridis", gid="vector-field")


def _mark_equilibria(ax, report: EquilibriumReport) -> None:
    for i, eq in enumerate(report.equilibria):
        marker, face = _MARKERS[eq.kind]
        ax.plot(
            [eq.point[0]],
            [eq.point[1]],
            ls="none",
            marker=marker,
            markerfacecolor=face,
            markeredgecolor="black",
            markersize=7,
            gid=f"equilibrium-{i}",
        )


def render_plot(
    inputs: Sequence[PathLike],
    spec: PlotSpec,
    out: PathLike,
    *,
    equilibria: Optional[EquilibriumReport] = None,
    field: Optional[FieldSample] = None,
) -> Path:
    """Render `inputs` as one SVG of kind `spec.kind`.

    Phase-plane plots accept an equilibrium report (one marker group per equilibrium,
    ids `equilibrium-<i>`) and a sampled vector field.
    """
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tables = [(Path(p).stem, read_columns(p, _COLUMNS[spec.kind])) for p in inputs]
    draw = _DRAW[spec.kind]

    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(spec.width_in, spec.height_in))
        try:
            if field is not None:
                _draw_field(ax, field)
            for name, data in tables:
                draw(ax, data, name if len(tables) > 1 else "")
            if equilibria is not None:
                _mark_equilibria(ax, equilibria)
            if spec.title:
                ax.set_title(spec.title)
            if ax.get_legend_handles_labels()[0]:
                ax.legend(fontsize="small", loc="best")
            fig.tight_layout()
            fig.savefig(out, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    logger.debug("[Plot] %s -> %s (%d input(s))", spec.kind, out, len(tables))
    return out


__all__ = ["read_columns", "render_plot"]
