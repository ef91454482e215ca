import json

import numpy as np
import pytest

from frustrated_diffusions.core.series import MeanTrajectory, read_series, write_series
from frustrated_diffusions.services.zero_noise import find_equilibria
from frustrated_diffusions.tools.cli import build_parser, main, resolve_params


def test_fixed_points_prints_the_report(capsys):
    assert main(["fixed-points", "--A", "2", "--B", "2.5", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["regime"] == "A-1<B<A+2"
    assert "saddle" in {e["kind"] for e in report["equilibria"]}


def test_small_simulation(tmp_path):
    out = tmp_path / "run.csv"
    code = main(["simulate", "--A", "2", "--B", "2.5", "--n", "20", "--steps", "100", "--stride", "10", "--out", str(out)])
    assert code == 0
    traj = read_series(out)
    assert len(traj) == 11
    assert traj.m1[0] == pytest.approx(0.8)


def test_simulation_replicas_go_to_a_directory(tmp_path):
    code = main(["simulate", "--n", "10", "--steps", "20", "--stride", "5", "--replicas", "2", "--out", str(tmp_path / "reps")])
    assert code == 0
    assert sorted(p.name for p in (tmp_path / "reps").iterdir()) == ["series_r000.csv", "series_r001.csv"]


def test_config_file_then_flags(tmp_path):
    cfg = tmp_path / "params.txt"
    cfg.write_text("# reference coupling\nsigma=0.3\nB=4\nseed=11\n")
    args = build_parser().parse_args(["--config", str(cfg), "simulate", "--A", "3", "--n", "40"])
    p = resolve_params(args)
    assert p.A == pytest.approx(3.0)
    assert p.B == pytest.approx(4.0)
    assert p.sigma == pytest.approx(0.3)
    assert (p.n1, p.n2, p.seed) == (20, 20, 11)


def test_hopf_writes_eigenvalue_table(tmp_path, capsys):
    out = tmp_path / "hopf.csv"
    assert main(["hopf", "--A", "2", "--B", "4", "--sigma-lo", "0", "--sigma-hi", "4", "--points", "41", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "sigma,re_l1,im_l1,re_l2,im_l2,l3,l4"
    printed = capsys.readouterr().out.strip()
    assert printed.startswith("sigma_c = ")
    assert float(printed.split("=")[1]) == pytest.approx(2.0, abs=1e-5)


def test_exit_codes(tmp_path):
    assert main(["preset", "no-such-preset"]) == 2
    assert main(["simulate", "--sigma", "-1", "--steps", "10"]) == 2
    assert main(["--threads", "0", "preset", "--list"]) == 2
    diverging = ["moments", "--A", "2", "--B", "2.5", "--m1", "100", "--dt-ode", "0.1", "--T", "10"]
    assert main(diverging + ["--out", str(tmp_path / "m.csv")]) == 3

    flat = tmp_path / "flat.csv"
    write_series(flat, MeanTrajectory(t0=0.0, dt_sample=0.1, m1=np.ones(200), m2=np.full(200, 0.5)))
    assert main(["period", "--in", str(flat), "--method", "dft"]) == 4
    assert main(["period", "--in", str(flat)]) == 4
    assert main(["period", "--in", str(flat), "--burn-in", "1.5"]) == 2


def test_period_of_a_rotation(tmp_path, capsys):
    t = 0.01 * np.arange(20001)
    path = tmp_path / "traj.csv"
    write_series(path, MeanTrajectory(t0=0.0, dt_sample=0.01, m1=np.sin(0.5 * t), m2=np.cos(0.5 * t)))
    assert main(["period", "--in", str(path), "--method", "poincare", "--burn-in", "0.1"]) == 0
    estimate = json.loads(capsys.readouterr().out)
    assert estimate["mean_period"] == pytest.approx(4 * np.pi, rel=1e-4)

    # nearest DFT bin to 1/(4 pi) over the 180 time units kept
    assert main(["period", "--in", str(path), "--method", "dft", "--burn-in", "0.1"]) == 0
    estimate = json.loads(capsys.readouterr().out)
    assert estimate["mean_period"] == pytest.approx(4 * np.pi, rel=0.05)

    runs = tmp_path / "runs"
    runs.mkdir()
    path.rename(runs / "r000.csv")
    assert main(["spectrum", "--glob", str(runs / "*.csv"), "--out", str(tmp_path / "spectrum.csv")]) == 0
    assert (tmp_path / "spectrum.csv").exists()
    assert main(["spectrum", "--glob", str(tmp_path / "none*.csv")]) == 2


def test_preset_list(capsys):
    assert main(["preset", "--list"]) == 0
    listed = capsys.readouterr().out
    for name in ("table1-row1", "fig3", "fig8", "chaos", "tilde", "closure"):
        assert name in listed


def test_plot_from_fixed_points_report(tmp_path):
    report = tmp_path / "eq.json"
    assert main(["fixed-points", "--A", "2", "--B", "7", "--out", str(report)]) == 0
    series = tmp_path / "s.csv"
    write_series(series, MeanTrajectory(t0=0.0, dt_sample=0.1, m1=np.linspace(0, 1, 5), m2=np.linspace(1, 0, 5)))
    out = tmp_path / "phase.svg"
    args = ["plot", "--kind", "phase-plane", "--in", str(series), "--equilibria", str(report), "--out", str(out)]
    assert main(args) == 0
    assert 'id="equilibrium-0"' in out.read_text()


def test_fixed_points_table_by_default(capsys):
    assert main(["fixed-points", "--A", "2", "--B", "2.5"]) == 0
    printed = capsys.readouterr().out
    assert printed.splitlines()[0] == "A=2 B=2.5 regime A-1<B<A+2"
    assert len(printed.splitlines()) == 1 + len(find_equilibria(2.0, 2.5).equilibria)
    assert "saddle" in printed


def test_simulate_documented_flags(tmp_path):
    out = tmp_path / "traj.csv"
    flags = ["--A", "2", "--B", "2.5", "--sigma", "0.5", "--n", "20", "--dt", "0.005", "--steps", "100"]
    code = main(["simulate", *flags, "--seed", "3", "--ic-value", "0.6", "--stride", "10", "--out", str(out)])
    assert code == 0
    traj = read_series(out)
    assert len(traj) == 11
    assert traj.m1[0] == pytest.approx(0.6)
    assert traj.m2[0] == pytest.approx(0.6)


def test_phase_portrait_writes_the_field(tmp_path):
    out = tmp_path / "field.csv"
    assert main(["phase-portrait", "--A", "2", "--B", "2.5", "--window", "-2,2", "--res", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x,y,dx,dy,magnitude"
    assert len(lines) == 1 + 25
    x, y, dx, dy, mag = (float(v) for v in lines[1].split(","))
    assert (x, y) == (-2.0, -2.0)
    # at (-2, -2) the coupling vanishes and both components are -x^3 + x
    assert (dx, dy) == (pytest.approx(6.0), pytest.approx(6.0))
    assert 0.0 <= mag <= 1.0


def test_phase_portrait_svg(tmp_path):
    svg = tmp_path / "portrait.svg"
    args = ["phase-portrait", "--A", "2", "--B", "7", "--window=-1.5,1.5,-2,2", "--res", "8"]
    assert main(args + ["--out", str(tmp_path / "f.csv"), "--svg", str(svg)]) == 0
    assert 'id="equilibrium-0"' in svg.read_text()


def test_fp_means_and_snapshots(tmp_path):
    out = tmp_path / "fpmeans.csv"
    args = ["fp", "--A", "2", "--B", "2.5", "--sigma", "0.5", "--L", "2", "--cells", "40", "--T", "1", "--width", "0.2"]
    assert main(args + ["--out", str(out), "--snapshots", "every=0.5"]) == 0
    traj = read_series(out)
    assert len(traj) == 11
    snaps = sorted((tmp_path / "fpmeans_densities").iterdir())
    assert len(snaps) == 3
    assert snaps[0].read_text().splitlines()[0] == "x,q1,q2"
    assert len(snaps[-1].read_text().splitlines()) == 1 + 40


def test_fp_rejects_a_malformed_snapshot_request(tmp_path):
    with pytest.raises(SystemExit):
        main(["fp", "--T", "1", "--snapshots", "10", "--out", str(tmp_path / "x.csv")])


def test_moments_documented_flags(tmp_path):
    out = tmp_path / "mom.csv"
    assert main(["moments", "--A", "2", "--B", "4", "--sigma", "1", "--T", "1", "--out", str(out)]) == 0
    traj = read_series(out)
    assert len(traj) == 11
    assert traj.m1[0] == pytest.approx(0.8)


def test_tilde_error_table(tmp_path, capsys):
    out = tmp_path / "tilde.csv"
    args = ["tilde-error", "--A", "2", "--B", "4", "--sigma-list", "0.05,0.1", "--replicas", "20", "--T", "0.1"]
    assert main(args + ["--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "sigma,mean_error,stderr"
    assert [float(line.split(",")[0]) for line in lines[1:]] == [0.05, 0.1]
    assert "fitted slope" in capsys.readouterr().out


def test_chaos_table(tmp_path):
    out = tmp_path / "chaos.csv"
    args = ["chaos", "--A", "2", "--B", "2.5", "--sigma", "0.5", "--T", "0.1", "--n-list", "10,20"]
    assert main(args + ["--replicas", "3", "--mc-copies", "500", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "N,mean_error,stderr"
    assert [line.split(",")[0] for line in lines[1:]] == ["10", "20"]
    assert all(float(line.split(",")[1]) > 0 for line in lines[1:])


def test_list_flags_reject_garbage():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["chaos", "--n-list", "10,4.5"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["phase-portrait", "--A", "2", "--B", "3", "--window", "1,2,3"])
