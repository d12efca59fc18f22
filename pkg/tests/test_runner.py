"""
Scenario Runner and CLI: Test Suite.

 Group 1: Configuration
   1.  Every bundled scenario parses
   2.  Malformed, mistyped or incomplete scenarios raise ConfigInvalid
   3.  Plan errors report the ConfigInvalid category
   4.  Unreadable files raise ConfigInvalid
   5.  Plan presets resolve to the study plans

 Group 2: Scenario execution
   6.  Artifacts are byte-identical across runs with the same seed
   7.  Metadata records the seed, the measured grid, the resolved reference
       and the STFT parameters in use
   8.  A parallel scenario runs through the same surface
   9.  A failed bound marks the scenario failed with exit code 4
  10.  Period mismatch propagates as PeriodMismatch

 Group 3: Suite
  11.  An empty directory raises ConfigInvalid
  12.  The suite exit code is that of the first failing scenario by name
  13.  A malformed file is reported without stopping the suite
  14.  Every bundled scenario meets its own bounds (slow)
  15.  Ridge error falls with the step interval, then levels off (slow)

 Group 4: Artifacts
  16.  Heatmap is 8-bit grayscale, rows bottom (low frequency) to top
  17.  Spectrogram CSV reads back onto the same axes
  18.  Unlit ridge columns are written empty
  19.  The interactive heatmap carries axes in us and GHz

 Group 5: Command line
  20.  simulate / suite / oracle / compare exit codes and error.json
  21.  Malformed configs exit 2 with error.json
"""
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from PIL import Image

from app import main
from models.errors import ConfigInvalid, InvalidPlan, PeriodMismatch
from models.spectrogram import Spectrogram
from runner.config import LinkKind, OutputKind, load_scenario, scenario_from_dict
from runner.scenario import SUITE_REPORT_CSV, run_scenario, run_suite
from visualization.heatmap import (
    generate_heatmap_data, write_heatmap_html, write_heatmap_png, write_ridge_csv
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def small_lfm(**overrides):
    data = {
        "name": "small_lfm",
        "signal": {"kind": "lfm", "f_start_hz": 0.2e9, "f_end_hz": 0.6e9, "period_s": 2e-6},
        "sample_rate_hz": 2e9,
        "link": "time_division",
        "plan": {"band_hz": [0.1e9, 0.6e9], "delta_step_hz": 25e6, "step_period_s": 2e-6},
        "outputs": ["spectrogram_csv", "heatmap_image", "metadata", "ridge_csv"],
        "assertions": {"ridge_coverage_min": 0.9}
    }
    data.update(overrides)
    return data


def write_scenario(directory, data):
    path = Path(directory) / f"{data['name']}.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


# ═══════════════════════════════════════════════════════════════════════════════
# Group 1: Configuration
# ═══════════════════════════════════════════════════════════════════════════════

@pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_bundled_scenarios_parse(path):
    config = load_scenario(path)
    assert config.name == path.stem
    assert OutputKind.METADATA in config.outputs


@pytest.mark.parametrize("overrides", [
    {"colour": "blue"},
    {"link": "wavelength_division"},
    {"plan": {"f_base_hz": 0.1e9, "delta_f_hz": 25e6, "n_branches": 3}},
    {"plan": {"band_hz": [0.1e9, 0.6e9], "delta_step_hz": 25e6}},
    {"outputs": ["spectrogram_csv", "waterfall"]},
    {"outputs": {"spectrogram_csv": " "}},
    {"assertions": {"ridge_coverage_minimum": 0.9}},
    {"acquisition": {"n_scans": 2, "jitter_s": 1e-9}},
    {"acquisition": {"n_scans": 0}},
    {"link_config": {"sbs_fwhm_hz": -1.0}},
    {"oracle": {"window_len_samples": 1}},
    {"sample_rate_hz": 0.0},
    {"signal": {"preset": "lfm", "colour": "blue"}},
    {"plan": {"preset": "spiral"}},
    {"plan": {"preset": "full_band", "n_steps": 3}},
    {"plan": {"preset": "resolution"}},
    {"plan": {"f_step1_hz": 50e6, "delta_step_hz": 25e6, "step_period_s": 2e-6}},
    {"plan": {"band_hz": 0.1e9, "delta_step_hz": 25e6, "step_period_s": 2e-6}},
    {"link_config": {"sbs_fwhm_hz": "wide"}},
    {"outputs": "png"},
    {"sample_rate_hz": "fast"},
    {"acquisition": {"n_scans": "two"}},
    {"acquisition": ["n_scans", 2]},
    {"signal": {"kind": "lfm", "f_start_hz": 0.2e9, "period_s": 2e-6}},
    {"signal": "lfm"},
    {"assertions": {"resolvability": {"f_a_hz": 3e9}}},
    {"assertions": {"min_resolvable_separation_hz": 5e6}},
    {"oracle": {"window_len_samples": "long"}},
])
def test_malformed_scenarios(overrides):
    with pytest.raises(ConfigInvalid):
        scenario_from_dict(small_lfm(**overrides))


def test_missing_key():
    data = small_lfm()
    del data["plan"]
    with pytest.raises(ConfigInvalid):
        scenario_from_dict(data)


def test_plan_errors_report_as_config_invalid():
    with pytest.raises(InvalidPlan) as caught:
        scenario_from_dict(small_lfm(plan={"f_step1_hz": 50e6, "delta_step_hz": -1.0,
                                           "step_period_s": 2e-6, "n_steps": 21}))
    record = caught.value.to_dict()
    assert record["category"] == "ConfigInvalid"
    assert record["errorClass"] == "InvalidPlan"
    assert record["exitCode"] == 2
    assert PeriodMismatch("x").to_dict()["category"] == "PeriodMismatch"


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_scenario(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{\"name\": ", encoding="utf-8")
    with pytest.raises(ConfigInvalid):
        load_scenario(broken)


def test_plan_presets():
    full = scenario_from_dict(small_lfm(plan={"preset": "full_band"}))
    assert full.plan.n_steps == 781
    coarse = scenario_from_dict(small_lfm(plan={"preset": "resolution", "delta_step_hz": 100e6}))
    assert (coarse.plan.f_step1_hz, coarse.plan.n_steps) == (50e6, 40)
    gallery = scenario_from_dict(small_lfm(link="parallel", plan={"preset": "gallery"}))
    assert gallery.plan.n_branches == 20


# ═══════════════════════════════════════════════════════════════════════════════
# Group 2: Scenario execution
# ═══════════════════════════════════════════════════════════════════════════════

def test_artifacts_deterministic(tmp_path):
    config = scenario_from_dict(small_lfm(link_config={"noise_rms": 1e-3}))
    first = run_scenario(config, tmp_path / "a", seed=3)
    second = run_scenario(config, tmp_path / "b", seed=3)
    assert first.artifacts == ["heatmap.png", "ridge.csv", "spectrogram.csv", "metadata.json"]
    for name in first.artifacts:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert first.passed
    assert first.exit_code == 0


def test_metadata_contents(tmp_path):
    config = scenario_from_dict(small_lfm())
    run_scenario(config, tmp_path, seed=42)
    metadata = json.loads((tmp_path / "metadata.json").read_text(encoding="utf-8"))
    assert metadata["seed"] == 42
    assert metadata["periodMultiple"] == 1
    assert len(metadata["frequenciesHz"]) == 21
    assert metadata["frequenciesHz"][0] == pytest.approx(0.1e9)
    assert metadata["spectrogram"]["nFreq"] == 19
    assert metadata["result"]["metrics"]["ridgeCoverage"] >= 0.9
    assert metadata["scenario"]["plan"]["n_steps"] == 21
    assert metadata["scenario"]["reference_freq_hz"] is None
    assert metadata["referenceFreqHz"] == pytest.approx(0.1e9)
    assert metadata["sweepRateHzPerS"] == pytest.approx(0.4e9 / 2e-6)
    assert metadata["stftParams"] is None


def test_metadata_default_stft_params(tmp_path):
    config = scenario_from_dict(small_lfm(outputs=["stft_csv", "metadata"], assertions={}))
    assert config.oracle is None
    run_scenario(config, tmp_path)
    metadata = json.loads((tmp_path / "metadata.json").read_text(encoding="utf-8"))
    assert metadata["stftParams"] == {"window_len_samples": 512, "hop_samples": 128, "window_fn": "hann"}
    assert metadata["stft"] is not None


def test_parallel_scenario(tmp_path):
    config = scenario_from_dict(small_lfm(
        name="small_parallel",
        link="parallel",
        signal={"kind": "tone", "f_hz": 0.4e9, "period_s": 2e-6},
        plan={"f_base_hz": 0.3e9, "delta_f_hz": 25e6, "n_branches": 9},
        outputs={"spectrogram_csv": "branches.csv", "metadata": None},
        assertions={"ridge_coverage_min": 1.0}
    ))
    assert config.link is LinkKind.PARALLEL
    result = run_scenario(config, tmp_path)
    assert result.passed
    assert (tmp_path / "branches.csv").exists()


def test_failed_bound(tmp_path):
    config = scenario_from_dict(small_lfm(assertions={"ridge_coverage_min": 1.01,
                                                     "ridge_rms_error_max_hz": 1e9}))
    result = run_scenario(config, tmp_path)
    assert not result.passed
    assert result.exit_code == 4
    outcomes = {a.name: a.passed for a in result.assertions}
    assert outcomes == {"ridge_coverage_min": False, "ridge_rms_error_max_hz": True}


def test_period_mismatch(tmp_path):
    data = small_lfm(plan={"f_step1_hz": 50e6, "delta_step_hz": 25e6,
                           "step_period_s": 3e-6, "n_steps": 21})
    with pytest.raises(PeriodMismatch):
        run_scenario(scenario_from_dict(data), tmp_path)


# ═══════════════════════════════════════════════════════════════════════════════
# Group 3: Suite
# ═══════════════════════════════════════════════════════════════════════════════

def test_empty_suite(tmp_path):
    with pytest.raises(ConfigInvalid):
        run_suite(tmp_path, tmp_path / "out")


def test_suite_exit_code(tmp_path):
    suite = tmp_path / "suite"
    suite.mkdir()
    write_scenario(suite, small_lfm(name="c_good"))
    write_scenario(suite, small_lfm(name="b_unmet", assertions={"ridge_coverage_min": 1.01}))
    write_scenario(suite, small_lfm(name="a_mismatch",
                                    plan={"f_step1_hz": 50e6, "delta_step_hz": 25e6,
                                          "step_period_s": 3e-6, "n_steps": 21}))
    report = run_suite(suite, tmp_path / "out", seed=1)
    assert [r.name for r in report.results] == ["a_mismatch", "b_unmet", "c_good"]
    assert report.exit_code == 3
    assert report.results[0].error.category == "PeriodMismatch"

    table = pd.read_csv(tmp_path / "out" / SUITE_REPORT_CSV)
    assert table["scenario"].tolist() == ["a_mismatch", "b_unmet", "c_good"]
    assert table["exit_code"].tolist() == [3, 4, 0]
    assert (tmp_path / "out" / "c_good" / "spectrogram.csv").exists()


def test_suite_survives_malformed_file(tmp_path):
    suite = tmp_path / "suite"
    suite.mkdir()
    write_scenario(suite, small_lfm(name="good"))
    write_scenario(suite, small_lfm(name="broken", plan={"f_step1_hz": 50e6, "delta_step_hz": 25e6,
                                                         "step_period_s": 2e-6}))
    report = run_suite(suite, tmp_path / "out", seed=1)
    assert [r.name for r in report.results] == ["broken", "good"]
    assert report.results[0].error.category == "ConfigInvalid"
    assert report.results[1].passed
    assert report.exit_code == 2
    table = pd.read_csv(tmp_path / "out" / SUITE_REPORT_CSV)
    assert table["exit_code"].tolist() == [2, 0]


@pytest.fixture(scope="module")
def bundled_run(tmp_path_factory):
    """Runs a bundled scenario once per module, keyed by file stem"""
    out = tmp_path_factory.mktemp("bundled")
    results = {}

    def run(stem):
        if stem not in results:
            results[stem] = run_scenario(load_scenario(SCENARIO_DIR / f"{stem}.json"), out / stem, seed=1)
        return results[stem]
    return run


@pytest.mark.slow
@pytest.mark.parametrize("stem", [p.stem for p in sorted(SCENARIO_DIR.glob("*.json"))])
def test_bundled_scenarios_pass(bundled_run, stem):
    result = bundled_run(stem)
    failed = [(a.name, a.value, a.bound) for a in result.assertions if not a.passed]
    assert result.error is None
    assert failed == []
    assert result.passed


@pytest.mark.slow
def test_step_interval_trend(bundled_run):
    rms = {mhz: bundled_run(f"step_interval_{mhz}mhz_lfm").metrics["ridgeRmsErrorHz"]
           for mhz in (100, 50, 25, 10, 5)}
    # coarse steps: the error shrinks with the step interval
    assert rms[100] > rms[50] > rms[25]
    assert rms[10] <= rms[25]
    # fine steps: the gain bandwidth limits the accuracy
    assert rms[5] <= 1.25 * rms[10]
    assert rms[10] / rms[5] < rms[100] / rms[50]


# ═══════════════════════════════════════════════════════════════════════════════
# Group 4: Artifacts
# ═══════════════════════════════════════════════════════════════════════════════

def test_heatmap_orientation(tmp_path):
    intensity = np.zeros((3, 4))
    intensity[2, 0] = 1.0
    spec = Spectrogram(intensity, [1e9, 2e9, 3e9], np.arange(4) * 1e-9)
    with Image.open(write_heatmap_png(spec, tmp_path / "map.png")) as image:
        assert image.mode == "L"
        pixels = np.asarray(image)
    assert pixels.shape == (3, 4)
    assert pixels.dtype == np.uint8
    assert pixels[0, 0] == 255
    assert pixels[2, 0] == 0


def test_spectrogram_csv_axes(lfm_run, tmp_path):
    spectrogram, _, _ = lfm_run
    back = Spectrogram.read_csv(spectrogram.write_csv(tmp_path / "s.csv"))
    np.testing.assert_allclose(back.freq_axis_hz, spectrogram.freq_axis_hz, rtol=1e-9)
    np.testing.assert_allclose(back.time_axis_s, spectrogram.time_axis_s, rtol=1e-9, atol=1e-20)
    np.testing.assert_allclose(back.intensity, spectrogram.intensity, rtol=1e-9, atol=1e-15)


def test_ridge_csv_blank_cells(tmp_path):
    path = write_ridge_csv(np.array([0.0, 1e-9]), np.array([1e9, np.nan]), tmp_path / "r.csv",
                           np.array([0.0, np.nan]))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "time_s,ridge_hz,abs_error_hz"
    assert lines[2].endswith(",,")


def test_heatmap_html(tmp_path):
    spec = Spectrogram(np.array([[0.0, 1.0], [0.5, 0.25]]), [1e9, 2e9], [0.0, 1e-6])
    data = generate_heatmap_data(spec, title="demo")
    assert data["freqGHz"] == pytest.approx([1.0, 2.0])
    assert data["timeUs"] == pytest.approx([0.0, 1.0])
    assert data["intensity"] == [[0.0, 1.0], [0.5, 0.25]]
    html = write_heatmap_html(spec, tmp_path / "map.html", title="demo").read_text(encoding="utf-8")
    assert "spectrogram" in html
    assert "Frequency (GHz)" in html


# ═══════════════════════════════════════════════════════════════════════════════
# Group 5: Command line
# ═══════════════════════════════════════════════════════════════════════════════

def test_cli_simulate_exit_codes(tmp_path):
    good = write_scenario(tmp_path, small_lfm())
    assert main(["simulate", "--config", str(good), "--out", str(tmp_path / "ok")]) == 0
    assert not (tmp_path / "ok" / "error.json").exists()

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(small_lfm(link="wavelength_division")), encoding="utf-8")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "cfg")]) == 2
    error = json.loads((tmp_path / "cfg" / "error.json").read_text(encoding="utf-8"))
    assert error["category"] == "ConfigInvalid"

    mismatch = write_scenario(tmp_path, small_lfm(
        name="mismatch", plan={"f_step1_hz": 50e6, "delta_step_hz": 25e6,
                               "step_period_s": 3e-6, "n_steps": 21}))
    assert main(["simulate", "--config", str(mismatch), "--out", str(tmp_path / "phys")]) == 3
    error = json.loads((tmp_path / "phys" / "error.json").read_text(encoding="utf-8"))
    assert error["category"] == "PeriodMismatch"

    unmet = write_scenario(tmp_path, small_lfm(name="unmet", assertions={"ridge_coverage_min": 1.01}))
    assert main(["simulate", "--config", str(unmet), "--out", str(tmp_path / "assert")]) == 4
    error = json.loads((tmp_path / "assert" / "error.json").read_text(encoding="utf-8"))
    assert error["category"] == "AssertionFailed"


@pytest.mark.parametrize("overrides, error_class", [
    ({"plan": {"f_step1_hz": 50e6, "delta_step_hz": 25e6, "step_period_s": 2e-6}}, "ConfigInvalid"),
    ({"outputs": "png"}, "ConfigInvalid"),
    ({"plan": {"f_step1_hz": 50e6, "delta_step_hz": -1.0, "step_period_s": 2e-6, "n_steps": 21}},
     "InvalidPlan"),
])
def test_cli_malformed_config(tmp_path, overrides, error_class):
    path = write_scenario(tmp_path, small_lfm(**overrides))
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "out")]) == 2
    error = json.loads((tmp_path / "out" / "error.json").read_text(encoding="utf-8"))
    assert error["category"] == "ConfigInvalid"
    assert error["errorClass"] == error_class


def test_cli_suite(tmp_path):
    suite = tmp_path / "suite"
    suite.mkdir()
    write_scenario(suite, small_lfm())
    assert main(["suite", "--config", str(suite), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / SUITE_REPORT_CSV).exists()
    assert main(["suite", "--config", str(tmp_path / "nothing"), "--out", str(tmp_path / "e")]) == 2


def test_cli_oracle_and_compare(tmp_path, capsys):
    scenario = write_scenario(tmp_path, small_lfm(oracle={"window_len_samples": 256, "hop_samples": 64}))
    assert main(["oracle", "--config", str(scenario), "--out", str(tmp_path / "stft")]) == 0
    assert (tmp_path / "stft" / "stft.csv").exists()
    assert (tmp_path / "stft" / "stft.png").exists()

    assert main(["simulate", "--config", str(scenario), "--out", str(tmp_path / "run")]) == 0
    csv = str(tmp_path / "run" / "spectrogram.csv")
    capsys.readouterr()
    assert main(["compare", csv, csv]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["medianAbsErrHz"] == 0.0
    assert summary["coverageFraction"] > 0.9
