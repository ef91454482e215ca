import json
from typing import get_args

import pytest

from frustrated_diffusions.core.errors import NoRhythmError, UnknownPresetError
from frustrated_diffusions.core.series import read_series
from frustrated_diffusions.schemas import PipelineName
from frustrated_diffusions.services.presets import PRESETS, REGIMES, TABLE1_PERIODS, get_preset, run_preset
from frustrated_diffusions.services.rhythm import poincare_periods


def test_unknown_preset():
    with pytest.raises(UnknownPresetError):
        get_preset("fig99")


def test_every_pipeline_has_a_preset():
    assert {p.pipeline for p in PRESETS.values()} == set(get_args(PipelineName))
    assert set(TABLE1_PERIODS) <= set(PRESETS)


def test_scale_overrides():
    preset = get_preset("table1-row1")
    assert preset.resolved("desk")["replicas"] == 10
    assert preset.resolved("full")["steps"] == 1_000_000
    assert preset.resolved("full")["burn_in_steps"] == 20_000


def test_equilibria_preset(tmp_path):
    manifest = run_preset("fig3", out_dir=tmp_path)
    assert manifest.summary["A2_B2.5"]["regime"] == "A-1<B<A+2"
    assert manifest.summary["A2_B4"]["regime"] == "B=A+2"
    assert "stable-spiral" in manifest.summary["A2_B7"]["kinds"]
    for name in manifest.outputs:
        assert (tmp_path / name).exists()
    saved = json.loads((tmp_path / "manifest.json").read_text())
    assert saved["preset"] == "fig3"
    assert saved["params"]["seed"] == 0


def test_equilibria_preset_is_reproducible(tmp_path):
    run_preset("fig3", seed=1, out_dir=tmp_path / "a")
    run_preset("fig3", seed=1, out_dir=tmp_path / "b")
    for name in ("phase_A2_B2.5.svg", "equilibria_A2_B7.json", "planar_A2_B4_0.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_hopf_preset(tmp_path):
    manifest = run_preset("fig8", out_dir=tmp_path)
    for tag, expected in (("A2_B2.5", 1.65), ("A2_B4", 2.00), ("A2_B7", 2.45)):
        assert manifest.summary[tag]["sigma_c"] == pytest.approx(expected, abs=0.05)
        assert manifest.summary[tag]["max_l3"] < 0
        assert manifest.summary[tag]["max_l4"] < 0
    assert (tmp_path / "hopf_A2_B4.svg").exists()


def test_closure_preset_writes_under_output_root(isolated_output_root):
    manifest = run_preset("closure", seed=3)
    out = isolated_output_root / "closure" / "seed3-desk"
    assert (out / "manifest.json").exists()
    assert manifest.summary["rhs_max_rel_gap"] < 1e-10
    assert manifest.summary["planar_max_gap"] < 1e-10
    assert manifest.summary["eigen_points_checked"] == 150
    assert json.loads((out / "closure.json").read_text()) == manifest.summary


@pytest.mark.slow
def test_moment_regimes_preset(tmp_path):
    manifest = run_preset("fig6", out_dir=tmp_path)
    cycles = {(r["B"], r["sigma"]): r["cycle"] for r in manifest.summary["regimes"]}
    for _, B, sigma in ((2.0, 2.5, 0.5), (2.0, 4.0, 0.1), (2.0, 7.0, 0.6)):
        assert cycles[(B, sigma)]
        assert not cycles[(B, 5.0)]


@pytest.mark.slow
def test_fokker_planck_preset(tmp_path):
    manifest = run_preset("fig4", out_dir=tmp_path)
    assert manifest.summary["returns"] >= 3
    assert manifest.summary["gibbs_l1"] < 1e-3
    assert (tmp_path / "densities").is_dir()


@pytest.mark.slow
def test_table1_row3_period(tmp_path):
    manifest = run_preset("table1-row3", out_dir=tmp_path)
    assert manifest.summary["poincare"]["mean_period"] == pytest.approx(6.45, rel=0.05)
    assert manifest.summary["dft"]["mean_period"] == pytest.approx(6.45, rel=0.05)


@pytest.mark.slow
@pytest.mark.parametrize("name,poincare_rel", [("table1-row1", 0.1), ("table1-row2", 0.05)])
def test_table1_periods_and_estimator_agreement(tmp_path, name, poincare_rel):
    ref_poincare, ref_dft = TABLE1_PERIODS[name]
    summary = run_preset(name, out_dir=tmp_path).summary
    poincare, dft = summary["poincare"]["mean_period"], summary["dft"]["mean_period"]
    assert poincare == pytest.approx(ref_poincare, rel=poincare_rel)
    assert dft == pytest.approx(ref_dft, rel=0.05)
    assert poincare == pytest.approx(dft, rel=0.05)


@pytest.mark.slow
def test_noise_regimes_preset(tmp_path):
    manifest = run_preset("fig2", out_dir=tmp_path)
    rows = {(r["B"], r["sigma"]): r for r in manifest.summary["regimes"]}
    for _, B, sigma in REGIMES:
        assert rows[(B, 0.0)]["returns"] < 2
        assert rows[(B, sigma)]["returns"] >= 5
        large = rows[(B, 5.0)]
        # fewer than three returns leave no spread to measure
        assert large["returns"] < 3 or large["std_period"] > 0.5 * large["mean_period"]
    with pytest.raises(NoRhythmError):
        poincare_periods(read_series(tmp_path / "series_A2_B2.5_s0.csv"), 50.0)
