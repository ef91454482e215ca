# frustrated_diffusions/tools/cli.py

from __future__ import annotations

import argparse
import glob
import json
import logging
import re
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from frustrated_diffusions.core.errors import FrustratedDiffusionsError, ParameterError
from frustrated_diffusions.core.series import load_params_file, read_series, write_series
from frustrated_diffusions.core.settings import settings
from frustrated_diffusions.schemas import (
    DensitySpec,
    EquilibriumReport,
    InitialCondition,
    ModelParams,
    PlotSpec,
    validate_params,
)

logger = logging.getLogger(__name__)

_PARAM_FLAGS = ("alpha", "theta11", "theta12", "theta21", "theta22", "sigma", "dt", "steps", "seed", "n1", "n2")
# a value like -2,2 is not a negative number to argparse
_NEGATIVE_LIST = re.compile(r"-[\d.][\d.eE+-]*(,[-+\d.eE]+)+")


def _out_path(given: Optional[str], default_name: str) -> Path:
    return Path(given) if given else Path(settings.output_root) / default_name


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _int_list(text: str) -> list[int]:
    values = _float_list(text)
    if any(v != int(v) for v in values):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return [int(v) for v in values]


def _window(text: str) -> tuple[float, float, float, float]:
    values = _float_list(text)
    if len(values) == 2:
        return values[0], values[1], values[0], values[1]
    if len(values) == 4:
        return values[0], values[1], values[2], values[3]
    raise argparse.ArgumentTypeError(f"window is LO,HI or XMIN,XMAX,YMIN,YMAX, got {text!r}")


def _snapshot_every(text: str) -> float:
    key, sep, value = text.partition("=")
    try:
        every = float(value)
    except ValueError:
        every = -1.0
    if key.strip() != "every" or not sep or every <= 0:
        raise argparse.ArgumentTypeError(f"expected every=<time>, got {text!r}")
    return every


def _attach_negative_lists(argv: Sequence[str]) -> list[str]:
    out: list[str] = []
    for token in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE_LIST.fullmatch(token):
            out[-1] = f"{out[-1]}={token}"
        else:
            out.append(token)
    return out


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters (override --config)")
    g.add_argument("--A", type=float, default=None, help="coupling A = (1-alpha)*theta12")
    g.add_argument("--B", type=float, default=None, help="coupling B = -alpha*theta21")
    g.add_argument("--n", dest="n_total", type=int, default=None, help="total particles, split by alpha")
    for name in _PARAM_FLAGS:
        kind = int if name in ("steps", "seed", "n1", "n2") else float
        g.add_argument(f"--{name}", type=kind, default=None)


def resolve_params(args: argparse.Namespace) -> ModelParams:
    """Defaults <- --config file <- flags; --A/--B are mapped onto theta12/theta21."""
    raw: dict[str, Any] = load_params_file(args.config) if getattr(args, "config", None) else {}
    for name in _PARAM_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            raw[name] = value
    if getattr(args, "n_total", None) is not None:
        alpha = float(raw.get("alpha", 0.5))
        n1 = int(round(alpha * args.n_total))
        raw.update(n1=n1, n2=args.n_total - n1)
        raw.pop("alpha", None)
    A = raw.pop("A", None) if args.A is None else args.A
    B = raw.pop("B", None) if args.B is None else args.B
    raw.pop("A", None)
    raw.pop("B", None)
    p = validate_params(raw)
    if A is not None or B is not None:
        rest = p.model_dump(exclude={"alpha", "theta12", "theta21"})
        p = ModelParams.from_coupling(float(A if A is not None else p.A), float(B if B is not None else p.B), p.alpha, **rest)
    return p


# ── subcommands ──────────────────────────────────────────────────────────────

def cmd_simulate(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.particle_sim import simulate_replicas

    p = resolve_params(args)
    if p.n1 is None or p.n2 is None:
        n1 = int(round(p.alpha * 1000))
        p = p.updated(n1=n1, n2=1000 - n1)
    x0 = args.ic_value if args.x0 is None else args.x0
    y0 = args.ic_value if args.y0 is None else args.y0
    trajs = simulate_replicas(p, InitialCondition.uniform_value(x0, y0), args.replicas, args.stride)
    out = _out_path(args.out, "traj.csv" if args.replicas == 1 else "simulate")
    for r, traj in enumerate(trajs):
        path = out / f"series_r{r:03d}.csv" if args.replicas > 1 else (out if out.suffix == ".csv" else out / "traj.csv")
        write_series(path, traj)
        print(f"wrote {path}")
    return 0


def _equilibria_table(report: EquilibriumReport) -> str:
    lines = [f"A={report.A:g} B={report.B:g} regime {report.regime}" + ("" if report.in_hypothesis else " (outside A>1, B>A-1)")]
    for eq in report.equilibria:
        eigs = "  ".join(f"{a:+.6g}{b:+.6g}j" for a, b in eq.eigenvalues)
        lines.append(f"({eq.point[0]:+.10f}, {eq.point[1]:+.10f})  {eq.kind:16s}  {eigs}")
    return "\n".join(lines)


def cmd_fixed_points(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.zero_noise import find_equilibria

    report = find_equilibria(args.A, args.B)
    text = report.model_dump_json(indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    print(text if args.json else _equilibria_table(report))
    return 0


def cmd_phase_portrait(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.zero_noise import find_equilibria, sample_field, write_field_csv

    field = sample_field(args.A, args.B, args.window, args.res)
    out = _out_path(args.out, f"field_A{args.A:g}_B{args.B:g}.csv")
    write_field_csv(out, field)
    print(f"wrote {out}")
    if args.svg:
        from frustrated_diffusions.services.plotting import render_plot

        render_plot(
            args.inputs or [],
            PlotSpec(kind="phase-plane", title=f"A={args.A:g} B={args.B:g}", width_in=5.0, height_in=5.0),
            Path(args.svg),
            equilibria=find_equilibria(args.A, args.B),
            field=field,
        )
        print(f"wrote {args.svg}")
    return 0


def cmd_fp(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.fokker_planck import solve_fp, write_snapshots

    p = resolve_params(args)
    spec = DensitySpec(kind=args.kind, center1=args.center1, center2=args.center2, width=args.width)
    run = solve_fp(p, spec, T=args.T, sample_dt=args.sample_dt, L=args.L, cells=args.cells, snapshot_every=args.snapshots)
    out = _out_path(args.out, "fpmeans.csv")
    write_series(out, run.trajectory)
    print(f"wrote {out} (max mass drift per unit time {run.max_mass_drift:.2e})")
    if run.snapshots:
        densities = out.parent / f"{out.stem}_densities"
        write_snapshots(densities, run.snapshots)
        print(f"wrote {len(run.snapshots)} snapshot(s) to {densities}")
    return 0


def cmd_moments(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.moments import MomentState, integrate_moments

    p = resolve_params(args)
    traj = integrate_moments(MomentState(args.m1, args.m2, args.v1, args.v2), p, args.T, args.dt_ode, args.stride)
    out = _out_path(args.out, "mom.csv")
    write_series(out, traj)
    print(f"wrote {out}")
    return 0


def cmd_hopf(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.moments import hopf_scan, write_hopf_csv

    if not args.sigma_hi > args.sigma_lo >= 0:
        raise ParameterError(f"need 0 <= --sigma-lo < --sigma-hi, got {args.sigma_lo}, {args.sigma_hi}")
    p = resolve_params(args)
    report = hopf_scan(p, np.linspace(args.sigma_lo, args.sigma_hi, args.points), tol=args.tol)
    out = _out_path(args.out, "hopf.csv")
    write_hopf_csv(out, report)
    print(f"sigma_c = {report.sigma_c}" if report.sigma_c is not None else "no Hopf crossing on the grid")
    return 0


def cmd_tilde_error(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.moments import tilde_error, write_tilde_csv

    p = resolve_params(args)
    report = tilde_error(p, sigmas=args.sigma_list, replicas=args.replicas, T=args.T, x0=args.x0, y0=args.y0)
    out = _out_path(args.out, "tilde.csv")
    write_tilde_csv(out, report)
    print(f"wrote {out}")
    print(f"fitted slope {report.fitted_slope:.3f}")
    return 0


def cmd_chaos(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.limiting import chaos_error, write_chaos_csv

    p = resolve_params(args)
    report = chaos_error(
        p,
        n_values=args.n_list,
        replicas=args.replicas,
        T=args.T,
        means_source=args.means_source,
        mc_copies=args.mc_copies,
    )
    out = _out_path(args.out, "chaos.csv")
    write_chaos_csv(out, report)
    print(f"wrote {out}")
    print(f"fitted slope {report.fitted_slope:.3f}")
    return 0


def _burn_in_time(traj, fraction: float) -> float:
    if not 0.0 <= fraction < 1.0:
        raise ParameterError(f"--burn-in is a fraction in [0, 1), got {fraction}")
    return traj.t0 + fraction * (traj.horizon - traj.t0)


def cmd_period(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.rhythm import dft_period, poincare_periods, summarize_periods

    trajs = [read_series(path) for path in args.inputs]
    burn_in = _burn_in_time(trajs[0], args.burn_in)
    if args.method == "poincare":
        estimates = [poincare_periods(t, burn_in) for t in trajs]
        estimate = estimates[0] if len(estimates) == 1 else summarize_periods(estimates)
    else:
        _, estimate = dft_period(trajs, burn_in)
    print(estimate.model_dump_json(indent=2))
    return 0


def cmd_spectrum(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.rhythm import dft_period, write_spectrum_csv

    paths = sorted(glob.glob(args.glob))
    if not paths:
        raise ParameterError(f"no files match {args.glob!r}")
    trajs = [read_series(path) for path in paths]
    report, estimate = dft_period(trajs, _burn_in_time(trajs[0], args.burn_in))
    out = _out_path(args.out, "spectrum.csv")
    write_spectrum_csv(out, report)
    print(f"wrote {out}: period {estimate.mean_period:.4f} +/- {estimate.std_period:.4f} over {len(paths)} run(s)")
    return 0


def cmd_preset(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.presets import PRESETS, run_preset

    if args.list:
        for name, preset in sorted(PRESETS.items()):
            print(f"{name:12s} {preset.description}")
        return 0
    if not args.name:
        raise ParameterError("preset name required (or --list)")
    manifest = run_preset(args.name, seed=args.seed, scale=args.scale, out_dir=args.out)
    print(json.dumps(manifest.summary, indent=2, sort_keys=True))
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    from frustrated_diffusions.services.plotting import render_plot

    equilibria = None
    if args.equilibria:
        try:
            equilibria = EquilibriumReport.model_validate_json(Path(args.equilibria).read_text())
        except (OSError, ValueError) as e:
            raise ParameterError(f"cannot read equilibrium report {args.equilibria}: {e}") from e
    out = _out_path(args.out, f"{args.kind}.svg")
    render_plot(args.inputs, PlotSpec(kind=args.kind, title=args.title), out, equilibria=equilibria)
    print(f"wrote {out}")
    return 0


# ── parser ───────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frustrated-diffusions",
        description="Simulate and analyse two frustratedly coupled populations of diffusions.",
    )
    parser.add_argument("--threads", type=int, default=None, help=f"worker threads (default {settings.threads})")
    parser.add_argument("--config", default=None, help="key=value parameter file")
    parser.add_argument("--log-level", default=None, help=f"logging level (default {settings.log_level})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Euler-Maruyama particle system, mean trajectories as CSV")
    _add_param_flags(p)
    p.add_argument("--ic-value", type=float, default=0.8, help="every particle of both populations starts here")
    p.add_argument("--x0", type=float, default=None, help="population-1 start (overrides --ic-value)")
    p.add_argument("--y0", type=float, default=None, help="population-2 start (overrides --ic-value)")
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--stride", type=int, default=20, help="record every STRIDE steps")
    p.add_argument("--out", default=None, help="CSV file, or a directory when --replicas > 1")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fixed-points", help="equilibria of the noiseless system")
    p.add_argument("--A", type=float, required=True)
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--json", action="store_true", help="print the JSON report instead of a table")
    p.add_argument("--out", default=None, help="also write the JSON report here")
    p.set_defaults(func=cmd_fixed_points)

    p = sub.add_parser("phase-portrait", help="vector field on a lattice as CSV, optionally drawn as SVG")
    p.add_argument("--A", type=float, required=True)
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--window", type=_window, default=(-2.0, 2.0, -2.0, 2.0), help="LO,HI or XMIN,XMAX,YMIN,YMAX")
    p.add_argument("--res", type=int, default=40, help="lattice points per axis")
    p.add_argument("--out", default=None, help="field CSV")
    p.add_argument("--svg", default=None, help="also draw the portrait with its equilibria")
    p.add_argument("--in", dest="inputs", nargs="*", default=None, help="series CSVs drawn as (m1, m2) paths")
    p.set_defaults(func=cmd_phase_portrait)

    p = sub.add_parser("fp", help="nonlinear Fokker-Planck solver")
    _add_param_flags(p)
    p.add_argument("--T", type=float, default=200.0)
    p.add_argument("--sample-dt", type=float, default=0.1)
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--cells", type=int, default=800)
    p.add_argument("--kind", choices=["gaussian", "uniform"], default="gaussian")
    p.add_argument("--center1", type=float, default=0.8)
    p.add_argument("--center2", type=float, default=0.8)
    p.add_argument("--width", type=float, default=0.05)
    p.add_argument("--snapshots", type=_snapshot_every, default=None, metavar="every=TIME")
    p.add_argument("--out", default=None, help="means CSV; snapshots go to <stem>_densities/ beside it")
    p.set_defaults(func=cmd_fp)

    p = sub.add_parser("moments", help="Gaussian moment-closure ODE")
    _add_param_flags(p)
    p.add_argument("--T", type=float, default=500.0)
    p.add_argument("--dt-ode", type=float, default=0.001)
    p.add_argument("--stride", type=int, default=100)
    for name, default in (("m1", 0.8), ("m2", 0.8), ("v1", 0.0), ("v2", 0.0)):
        p.add_argument(f"--{name}", type=float, default=default)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("hopf", help="closure eigenvalues against sigma and the Hopf noise level")
    _add_param_flags(p)
    p.add_argument("--sigma-lo", type=float, default=0.0)
    p.add_argument("--sigma-hi", type=float, default=4.0)
    p.add_argument("--points", type=int, default=401)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_hopf)

    p = sub.add_parser("tilde-error", help="limiting pair against its Gaussian approximation")
    _add_param_flags(p)
    p.add_argument("--sigma-list", type=_float_list, default=[0.025, 0.05, 0.1, 0.2])
    p.add_argument("--replicas", type=int, default=1000)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--x0", type=float, default=0.8)
    p.add_argument("--y0", type=float, default=0.8)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_tilde_error)

    p = sub.add_parser("chaos", help="coupled particle/limiting path error against N")
    _add_param_flags(p)
    p.add_argument("--n-list", type=_int_list, default=[10, 40, 160, 640])
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--means-source", choices=["picard", "fokker-planck"], default="picard")
    p.add_argument("--mc-copies", type=int, default=100_000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_chaos)

    p = sub.add_parser("period", help="rhythm period of mean trajectories")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--method", choices=["poincare", "dft"], default="poincare")
    p.add_argument("--burn-in", type=float, default=0.1, help="fraction of the horizon discarded")
    p.set_defaults(func=cmd_period)

    p = sub.add_parser("spectrum", help="replica-averaged DFT modulus of m2")
    p.add_argument("--glob", required=True)
    p.add_argument("--burn-in", type=float, default=0.1, help="fraction of the horizon discarded")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("preset", help="run a named experiment")
    p.add_argument("name", nargs="?")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", choices=["desk", "full"], default="desk")
    p.add_argument("--out", default=None)
    p.add_argument("--list", action="store_true")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("plot", help="render CSV outputs as SVG")
    p.add_argument("--kind", choices=["trajectory", "phase-plane", "spectrum", "eigenvalues", "density"], required=True)
    p.add_argument("--in", dest="inputs", nargs="*", default=[])
    p.add_argument("--equilibria", default=None, help="EquilibriumReport JSON (phase-plane)")
    p.add_argument("--title", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(_attach_negative_lists(sys.argv[1:] if argv is None else argv))
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.threads is not None:
        if args.threads < 1:
            logger.error("[CLI] --threads must be >= 1")
            return ParameterError.exit_code
        settings.threads = args.threads
    try:
        return args.func(args)
    except FrustratedDiffusionsError as e:
        logger.error("[CLI] %s: %s", args.command, e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
