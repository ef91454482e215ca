# frustrated_diffusions/services/presets.py
"""Named experiments. A preset plus a seed fully determines every output file."""
from __future__ import annotations

import json
import logging
import math
import platform
import time
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Literal, Optional, Union

import numpy as np

from frustrated_diffusions import __version__
from frustrated_diffusions.core.errors import FrustratedDiffusionsError, NoRhythmError, UnknownPresetError
from frustrated_diffusions.core.series import MeanTrajectory, write_series
from frustrated_diffusions.core.settings import settings
from frustrated_diffusions.schemas import (
    DensitySpec,
    ExperimentPreset,
    InitialCondition,
    ModelParams,
    PlotSpec,
    RunManifest,
)
from frustrated_diffusions.services import fokker_planck as fp
from frustrated_diffusions.services.limiting import chaos_error, write_chaos_csv
from frustrated_diffusions.services.moments import (
    MomentState,
    hopf_eigenvalues,
    hopf_scan,
    integrate_moments,
    moment_rhs,
    quadrature_moment_rhs,
    tilde_error,
    write_hopf_csv,
    write_tilde_csv,
)
from frustrated_diffusions.services.particle_sim import simulate_particles, simulate_replicas
from frustrated_diffusions.services.plotting import render_plot
from frustrated_diffusions.services.rhythm import (
    count_returns,
    crossing_times,
    dft_period,
    poincare_periods,
    summarize_periods,
    write_spectrum_csv,
)
from frustrated_diffusions.services.zero_noise import find_equilibria, integrate_planar, sample_field

logger = logging.getLogger(__name__)

Scale = Literal["desk", "full"]

# (A, B, oscillating sigma) of the three reference regimes
REGIMES: tuple[tuple[float, float, float], ...] = ((2.0, 2.5, 0.5), (2.0, 4.0, 0.1), (2.0, 7.0, 0.6))
TABLE1_PERIODS = {
    "table1-row1": (19.35, 19.31),
    "table1-row2": (29.34, 28.90),
    "table1-row3": (6.45, 6.45),
}
LARGE_SIGMA = 5.0
# cycle: regular returns with non-vanishing amplitude
CYCLE_REL_STD = 0.05
CYCLE_MIN_AMPLITUDE = 1e-3


def _params(A: float, B: float, sigma: float, **fields: Any) -> ModelParams:
    base = {"n1": 500, "n2": 500, "theta11": 8.0, "theta22": 8.0, "dt": 0.005, "steps": 200_000}
    return ModelParams.from_coupling(A, B, 0.5, sigma=sigma, **{**base, **fields})


def _tag(A: float, B: float, sigma: Optional[float] = None) -> str:
    tag = f"A{A:g}_B{B:g}"
    return tag if sigma is None else f"{tag}_s{sigma:g}"


PRESETS: dict[str, ExperimentPreset] = {}


def _register(preset: ExperimentPreset) -> None:
    PRESETS[preset.name] = preset


for _i, (_A, _B, _s) in enumerate(REGIMES, start=1):
    _register(
        ExperimentPreset(
            name=f"table1-row{_i}",
            description=f"Particle-system rhythm periods at A={_A:g}, B={_B:g}, sigma={_s:g} (Poincare and DFT)",
            pipeline="table1",
            params=_params(_A, _B, _s),
            options={"burn_in_steps": 20_000, "sample_stride": 20},
            desk={"steps": 200_000, "replicas": 10},
            full={"steps": 1_000_000, "replicas": 50},
            outputs=["series_r*.csv", "spectrum.csv", "trajectory.svg", "spectrum.svg"],
        )
    )

_register(
    ExperimentPreset(
        name="fig2",
        description="Particle means for sigma in {0, oscillating, 5} in each regime",
        pipeline="noise-regimes",
        params=_params(2.0, 2.5, 0.5),
        options={"sample_stride": 20, "burn_in": 50.0},
        desk={"steps": 100_000},
        full={"steps": 200_000},
        outputs=["regimes.csv", "series_*.csv", "phase_*.svg"],
    )
)
_register(
    ExperimentPreset(
        name="fig3",
        description="Equilibria and phase portraits of the noiseless system in the three regimes",
        pipeline="equilibria",
        params=_params(2.0, 2.5, 0.0),
        options={"window": [-2.0, 2.0, -2.0, 2.0], "resolution": 25},
        outputs=["equilibria_*.json", "phase_*.svg"],
    )
)
_register(
    ExperimentPreset(
        name="fig4",
        description="Fokker-Planck densities and means at A=2, B=2.5, sigma=0.5, plus the Gibbs stationarity check",
        pipeline="fokker-planck",
        params=_params(2.0, 2.5, 0.5),
        options={"T": 150.0, "sample_dt": 0.1, "snapshot_every": 10.0, "gibbs_T": 10.0, "L": 4.0, "cells": 800},
        full={"T": 200.0},
        outputs=["fp_means.csv", "densities/", "fp_trajectory.svg", "fp_density.svg"],
    )
)
_register(
    ExperimentPreset(
        name="fig5",
        description="Closure means and variances over time in the three regimes",
        pipeline="moment-series",
        params=_params(2.0, 2.5, 0.5),
        options={"T": 200.0, "sample_stride": 100},
        desk={"dt_ode": 0.002},
        full={"dt_ode": 0.001},
        outputs=["moments_*.csv", "moments_*.svg"],
    )
)
_register(
    ExperimentPreset(
        name="fig6",
        description="Closure dynamics projected on (m1, m2) for sigma in {0, oscillating, 5}",
        pipeline="moment-regimes",
        params=_params(2.0, 2.5, 0.5),
        options={"T": 500.0, "sample_stride": 10, "burn_in": 100.0},
        desk={"dt_ode": 0.002},
        full={"dt_ode": 0.001},
        outputs=["regimes.csv", "moments_*.csv", "phase_*.svg"],
    )
)
_register(
    ExperimentPreset(
        name="fig8",
        description="Eigenvalues of the closure at the symmetric equilibrium against sigma; Hopf noise levels",
        pipeline="hopf",
        params=_params(2.0, 2.5, 0.0),
        options={"sigma_max": 4.0, "points": 401},
        outputs=["hopf_*.csv", "hopf_*.svg"],
    )
)
_register(
    ExperimentPreset(
        name="chaos",
        description="Coupled particle/limiting path error against N at A=2, B=2.5, sigma=0.5, T=1",
        pipeline="chaos",
        params=_params(2.0, 2.5, 0.5),
        options={"n_values": [10, 40, 160, 640], "T": 1.0, "picard_tol": 1e-4},
        desk={"replicas": 200, "mc_copies": 100_000},
        full={"replicas": 1000, "mc_copies": 400_000},
        outputs=["chaos.csv"],
    )
)
_register(
    ExperimentPreset(
        name="tilde",
        description="Limiting pair against its Gaussian approximation for small sigma, T=1",
        pipeline="tilde",
        params=_params(2.0, 2.5, 0.1, dt=0.001),
        options={"sigmas": [0.025, 0.05, 0.1, 0.2], "T": 1.0, "picard_tol": 1e-7},
        desk={"replicas": 1000},
        full={"replicas": 4000},
        outputs=["tilde.csv"],
    )
)
_register(
    ExperimentPreset(
        name="closure",
        description="Closure identities: quadrature drifts, closed-form Hopf spectrum, noiseless reduction",
        pipeline="closure",
        params=_params(2.0, 2.5, 0.5),
        options={"states": 100, "sigma_points": 50, "T": 20.0, "dt_ode": 0.01},
        outputs=["closure.json"],
    )
)


# ── pipelines ────────────────────────────────────────────────────────────────

Outputs = tuple[list[str], dict[str, Any]]


def _write_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _run_table1(preset: ExperimentPreset, p: ModelParams, opts: dict[str, Any], out: Path) -> Outputs:
    p = p.updated(steps=int(opts["steps"]))
    stride = int(opts["sample_stride"])
    burn_in = int(opts["burn_in_steps"]) * p.dt
    trajs = simulate_replicas(p, InitialCondition.uniform_value(0.8, 0.8), int(opts["replicas"]), stride)
    files = []
    for r, traj in enumerate(trajs):
        write_series(out / f"series_r{r:03d}.csv", traj)
        files.append(f"series_r{r:03d}.csv")
    poincare = summarize_periods([poincare_periods(t, burn_in) for t in trajs])
    spectrum, dft = dft_period(trajs, burn_in)
    write_spectrum_csv(out / "spectrum.csv", spectrum)
    render_plot([out / "series_r000.csv"], PlotSpec(kind="trajectory", title=preset.description), out / "trajectory.svg")
    render_plot([out / "spectrum.csv"], PlotSpec(kind="spectrum"), out / "spectrum.svg")
    files += ["spectrum.csv", "trajectory.svg", "spectrum.svg"]
    ref_poincare, ref_dft = TABLE1_PERIODS[preset.name]
    summary = {
        "poincare": poincare.model_dump(),
        "dft": dft.model_dump(),
        "bin_width": spectrum.bin_width,
        "reference_periods": {"poincare": ref_poincare, "dft": ref_dft},
    }
    return files, summary


def _run_noise_regimes(preset: ExperimentPreset, p: ModelParams, opts: dict[str, Any], out: Path) -> Outputs:
    stride, burn_in = int(opts["sample_stride"]), float(opts["burn_in"])
    ic = InitialCondition.uniform_value(0.8, 0.8)
    rows, files = ["A,B,sigma,returns,mean_period,std_period"], []
    table = []
    for A, B, s_mid in REGIMES:
        for sigma in (0.0, s_mid, LARGE_SIGMA):
            run_p = _params(A, B, sigma, seed=p.seed, steps=int(opts["steps"]))
            traj = simulate_particles(run_p, ic, stride).trajectory
            name = f"series_{_tag(A, B, sigma)}.csv"
            write_series(out / name, traj)
            times = crossing_times(traj, burn_in)
            intervals = np.diff(times)
            mean = float(np.mean(intervals)) if intervals.size else float("nan")
            std = float(np.std(intervals, ddof=1)) if intervals.size > 1 else float("nan")
            rows.append(f"{A!r},{B!r},{sigma!r},{times.size},{mean!r},{std!r}")
            table.append({"A": A, "B": B, "sigma": sigma, "returns": int(times.size), "mean_period": mean, "std_period": std})
            svg = f"phase_{_tag(A, B, sigma)}.svg"
            render_plot([out / name], PlotSpec(kind="phase-plane", title=f"A={A:g} B={B:g} sigma={sigma:g}"), out / svg)
            files += [name, svg]
    (out / "regimes.csv").write_text("\n".join(rows) + "\n")
    return ["regimes.csv"] + files, {"regimes": table}


def _run_equilibria(preset: ExperimentPreset, p: ModelParams, opts: dict[str, Any], out: Path) -> Outputs:
    window = tuple(float(v) for v in opts["window"])
    files, summary = [], {}
    for A, B, _ in REGIMES:
        report = find_equilibria(A, B)
        name = f"equilibria_{_tag(A, B)}.json"
        _write_json(out / name, report.model_dump())
        starts = np.array([[0.8, 0.8], [-0.8, -0.8], [0.1, -0.1], [-0.1, 0.1], [1.5, -1.5], [-1.5, 1.5]])
        paths = integrate_planar(starts, A, B, T=20.0, dt=0.01, record_every=5)
        csvs = []
        for j in range(starts.shape[0]):
            cname = f"planar_{_tag(A, B)}_{j}.csv"
            write_series(
                out / cname, MeanTrajectory(t0=0.0, dt_sample=0.05, m1=paths[:, j, 0], m2=paths[:, j, 1])
            )
            csvs.append(out / cname)
        svg = f"phase_{_tag(A, B)}.svg"
        render_plot(
            csvs,
            PlotSpec(kind="phase-plane", title=f"A={A:g} B={B:g}", width_in=5.0, height_in=5.0),
            out / svg,
            equilibria=report,
            field=sample_field(A, B, window, int(opts["resolution"])),  # type: ignore[arg-type]
        )
        files += [name, svg] + [c.name for c in csvs]
        summary[_tag(A, B)] = {"regime": report.regime, "kinds": report.kinds()}
    return files, summary


def _run_fokker_planck(preset: ExperimentPreset, p: ModelParams, opts: dict[str, Any], out: Path) -> Outputs:
    L, cells = float(opts["L"]), int(opts["cells"])
    run = fp.solve_fp(
        p,
        DensitySpec(center1=0.8, center2=0.8),
        T=float(opts["T"]),
        sample_dt=float(opts["sample_dt"]),
        L=L,
        cells=cells,
        snapshot_every=float(opts["snapshot_every"]),
    )
    write_series(out / "fp_means.csv", run.trajectory)
    snaps = fp.write_snapshots(out / "densities", run.snapshots)
    render_plot([out / "fp_means.csv"], PlotSpec(kind="trajectory", title="Fokker-Planck means"), out / "fp_trajectory.svg")
    render_plot([snaps[-1]], PlotSpec(kind="density", title=f"t={run.snapshots[-1].t:g}"), out / "fp_density.svg")

    # zero coupling relaxes each population to its Gibbs density
    free = p.updated(theta11=0.0, theta12=0.0, theta21=0.0, theta22=0.0, sigma=1.0)
    # a symmetric start keeps the slow inter-well mode unexcited
    relaxed = fp.solve_fp(
        free,
        DensitySpec(center1=0.0, center2=0.0, width=0.5),
        T=float(opts["gibbs_T"]),
        sample_dt=1.0,
        L=L,
        cells=cells,
        snapshot_every=float(opts["gibbs_T"]),
    )
    final = relaxed.snapshots[-1]
    gibbs = fp.gibbs_density(final.grid, 1.0)
    l1 = float(np.sum(np.abs(final.q1 - gibbs)) * final.h)

    summary = {
        "returns": count_returns(run.trajectory, 0.0),
        "max_mass_drift_per_time": run.max_mass_drift,
        "pde_steps": run.steps,
        "gibbs_l1": l1,
    }
    files = ["fp_means.csv", "fp_trajectory.svg", "fp_density.svg"] + [f"densities/{s.name}" for s in snaps]
    return files, summary


def _moment_run(A: float, B: float, sigma: float, opts: dict[str, Any]) -> MeanTrajectory:
    return integrate_moments(
        MomentState(0.8, 0.8, 0.0, 0.0),
        _params(A, B, sigma),
        float(opts["T"]),
        dt_ode=float(opts["dt_ode"]),
        sample_stride=int(opts["sample_stride"]),
    )


def _run_moment_series(preset: ExperimentPreset, p: ModelParams, opts: dict[str, Any], out: Path) -> Outputs:
    files = []
    for A, B, sigma in REGIMES:
        traj = _moment_run(A, B, sigma, opts)
        name = f"moments_{_tag(A, B, sigma)}"
        write_series(out / f"{name}.csv", traj)
        render_plot([out / f"{name}.csv"], PlotSpec(kind="trajectory", title=f"A={A:g} B={B:g} sigma={sigma:g}"), out / f"{name}.svg")
        files += [f"{name}.csv", f"{name}.svg"]
    return files, {}


def _run_moment_regimes(preset: ExperimentPreset, p: ModelParams, opts: dict[str, Any], out: Path) -> Outputs:
    burn_in = float(opts["burn_in"])
    rows, files, table = ["A,B,sigma,returns,mean_period,rel_std,amplitude,cycle"], [], []
    for A, B, s_mid in REGIMES:
        for sigma in (0.0, s_mid, LARGE_SIGMA):
            traj = _moment_run(A, B, sigma, opts)
            name = f"moments_{_tag(A, B, sigma)}"
            write_series(out / f"{name}.csv", traj)
            try:
                est = poincare_periods(traj, burn_in)
                returns, mean, rel = est.n_events, est.mean_period, est.std_period / est.mean_period
            except NoRhythmError as e:
                returns, mean, rel = e.n_crossings, float("nan"), float("nan")
            amplitude = float(np.ptp(traj.after(burn_in).m2))
            cycle = returns >= 10 and rel < CYCLE_REL_STD and amplitude > CYCLE_MIN_AMPLITUDE
            rows.append(f"{A!r},{B!r},{sigma!r},{returns},{mean!r},{rel!r},{amplitude!r},{int(cycle)}")
            table.append(
                {"A": A, "B": B, "sigma": sigma, "returns": returns, "mean_period": mean, "amplitude": amplitude, "cycle": cycle}
            )
            render_plot([out / f"{name}.csv"], PlotSpec(kind="phase-plane", title=f"A={A:g} B={B:g} sigma={sigma:g}"), out / f"phase_{_tag(A, B, sigma)}.svg")
            files += [f"{name}.csv", f"phase_{_tag(A, B, sigma)}.svg"]
    (out / "regimes.csv").write_text("\n".join(rows) + "\n")
    return ["regimes.csv"] + files, {"regimes": table}


def _run_hopf(preset: ExperimentPreset, p: ModelParams, opts: dict[str, Any], out: Path) -> Outputs:
    grid = np.linspace(0.0, float(opts["sigma_max"]), int(opts["points"]))
    files, summary = [], {}
    for A, B, _ in REGIMES:
        report = hopf_scan(_params(A, B, 0.0), grid)
        name = f"hopf_{_tag(A, B)}"
        write_hopf_csv(out / f"{name}.csv", report)
        render_plot([out / f"{name}.csv"], PlotSpec(kind="eigenvalues", title=f"A={A:g} B={B:g}"), out / f"{name}.svg")
        files += [f"{name}.csv", f"{name}.svg"]
        summary[_tag(A, B)] = {
            "sigma_c": report.sigma_c,
            "max_l3": float(np.max(report.eigen_table[:, 2].real)),
            "max_l4": float(np.max(report.eigen_table[:, 3].real)),
        }
    return files, summary


def _run_chaos(preset: ExperimentPreset, p: ModelParams, opts: dict[str, Any], out: Path) -> Outputs:
    report = chaos_error(
        p,
        n_values=opts["n_values"],
        replicas=int(opts["replicas"]),
        T=float(opts["T"]),
        picard_tol=float(opts["picard_tol"]),
        mc_copies=int(opts["mc_copies"]),
    )
    write_chaos_csv(out / "chaos.csv", report)
    return ["chaos.csv"], report.model_dump()


def _run_tilde(preset: ExperimentPreset, p: ModelParams, opts: dict[str, Any], out: Path) -> Outputs:
    report = tilde_error(
        p, sigmas=opts["sigmas"], replicas=int(opts["replicas"]), T=float(opts["T"]), picard_tol=float(opts["picard_tol"])
    )
    write_tilde_csv(out / "tilde.csv", report)
    return ["tilde.csv"], report.model_dump()


def _run_closure(preset: ExperimentPreset, p: ModelParams, opts: dict[str, Any], out: Path) -> Outputs:
    rng = np.random.default_rng(p.seed)
    rhs_gap = 0.0
    for _ in range(int(opts["states"])):
        m1, m2 = rng.uniform(-2.0, 2.0, 2)
        v1, v2 = rng.uniform(0.0, 2.0, 2)
        s = MomentState(float(m1), float(m2), float(v1), float(v2))
        a, b = moment_rhs(s, p).as_array(), quadrature_moment_rhs(s, p).as_array()
        rhs_gap = max(rhs_gap, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))))

    eigen_checked = 0
    for A, B, _ in REGIMES:
        for sigma in np.linspace(0.0, 4.0, int(opts["sigma_points"])):
            hopf_eigenvalues(_params(A, B, 0.0), float(sigma))  # raises on mismatch
            eigen_checked += 1

    T, dt = float(opts["T"]), float(opts["dt_ode"])
    planar_gap = 0.0
    for A, B, _ in REGIMES:
        traj = integrate_moments(MomentState(0.8, 0.3, 0.0, 0.0), _params(A, B, 0.0), T, dt_ode=dt, sample_stride=1)
        path = integrate_planar(np.array([[0.8, 0.3]]), A, B, T, dt=dt, record_every=1)
        planar_gap = max(planar_gap, float(np.max(np.abs(traj.m1 - path[:, 0, 0]) + np.abs(traj.m2 - path[:, 0, 1]))))

    summary = {"rhs_max_rel_gap": rhs_gap, "eigen_points_checked": eigen_checked, "planar_max_gap": planar_gap}
    _write_json(out / "closure.json", summary)
    return ["closure.json"], summary


_PIPELINES: dict[str, Callable[[ExperimentPreset, ModelParams, dict[str, Any], Path], Outputs]] = {
    "table1": _run_table1,
    "noise-regimes": _run_noise_regimes,
    "equilibria": _run_equilibria,
    "fokker-planck": _run_fokker_planck,
    "moment-series": _run_moment_series,
    "moment-regimes": _run_moment_regimes,
    "hopf": _run_hopf,
    "chaos": _run_chaos,
    "tilde": _run_tilde,
    "closure": _run_closure,
}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownPresetError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None


def _versions() -> dict[str, str]:
    out = {"frustrated-diffusions": __version__, "python": platform.python_version()}
    for dist in ("numpy", "scipy", "matplotlib", "pydantic"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = "unknown"
    return out


def _finite(value: Any) -> Any:
    # JSON has no NaN
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_finite(v) for v in value]
    return value


def run_preset(
    name: str,
    seed: int = 0,
    scale: Scale = "desk",
    out_dir: Optional[Union[str, Path]] = None,
) -> RunManifest:
    """Run preset `name` and write its outputs plus `manifest.json` into `out_dir`.

    out_dir defaults to <output_root>/<name>/seed<seed>-<scale>.
    """
    preset = get_preset(name)
    out = Path(out_dir) if out_dir is not None else Path(settings.output_root) / name / f"seed{seed}-{scale}"
    out.mkdir(parents=True, exist_ok=True)
    params = preset.params.updated(seed=seed)
    opts = preset.resolved(scale)
    logger.info("[Preset] %s (%s, seed=%d) -> %s", name, scale, seed, out)

    started = time.perf_counter()
    try:
        files, summary = _PIPELINES[preset.pipeline](preset, params, opts, out)
    except FrustratedDiffusionsError as e:
        logger.error("[Preset] %s (%s, seed=%d) failed: %s", name, scale, seed, e)
        raise
    elapsed = time.perf_counter() - started

    manifest = RunManifest(
        preset=name,
        scale=scale,
        seed=seed,
        params=params.model_dump(),
        options=opts,
        versions=_versions(),
        wall_time_s=elapsed,
        outputs=files,
        summary=_finite(summary),
    )
    (out / "manifest.json").write_text(manifest.model_dump_json(indent=2) + "\n")
    logger.info("[Preset] %s done in %.1fs, %d output(s)", name, elapsed, len(files))
    return manifest


__all__ = ["PRESETS", "REGIMES", "TABLE1_PERIODS", "get_preset", "run_preset"]
