"""
Time-Division Link: Test Suite.

 Group 1: Plans
   1.  The full-band and step-interval plans span exactly 0.1 to 4.0 GHz
   2.  validate_plan stores m and rejects non-integer or conflicting multiples
   3.  Step indices outside 1..N raise IndexOutOfRange

 Group 2: Drive and record
   4.  The reference is twice the SUT peak and the SUT tiles the step
   5.  Running an unvalidated plan raises PlanNotValidated
   6.  Record length is scans x steps x step samples
   7.  Noise is reproducible per seed, independent of the worker count
   8.  The acquisition offset rotates the periodic record

 Group 3: Mapping
   9.  A tone lights its own step and its neighbours fall off monotonically
  10.  Rows within 1.5 gain bandwidths of the reference are dropped
"""
import numpy as np
import pytest

from conftest import FS, GAMMA, PERIOD, band_plan, time_division_spectrogram
from models.errors import ConfigInvalid, IndexOutOfRange, PeriodMismatch, PlanNotValidated
from models.link_config import LinkConfig
from models.plans import PlanBuilder, SfcwPlan
from models.waveforms import Tone, synthesize, tile_periodic
from photonics.time_division import (
    measured_frequencies, measured_frequency, run_time_division, step_drive, validate_plan
)


def _small_run(config, **kwargs):
    plan = band_plan(0.1e9, 0.2e9, 25e6)
    validate_plan(plan, PERIOD)
    sut = synthesize(Tone(150e6, PERIOD), FS)
    return run_time_division(sut, 0.1e9, plan, config, **kwargs)


# ═══════════════════════════════════════════════════════════════════════════════
# Group 1: Plans
# ═══════════════════════════════════════════════════════════════════════════════

def test_full_band_plan_span():
    plan = PlanBuilder.full_band_plan()
    freqs = measured_frequencies(plan, LinkConfig())
    assert freqs.size == 781
    assert freqs[0] == pytest.approx(0.1e9)
    assert freqs[-1] == pytest.approx(4.0e9)
    assert measured_frequency(plan, 781, LinkConfig()) == pytest.approx(4.0e9)


@pytest.mark.parametrize("step, n_steps", [(100e6, 40), (50e6, 79), (25e6, 157), (10e6, 391), (5e6, 781)])
def test_resolution_plans_share_the_band(step, n_steps):
    plan = PlanBuilder.resolution_plan(step)
    freqs = measured_frequencies(plan, LinkConfig())
    assert plan.n_steps == n_steps
    assert freqs[0] == pytest.approx(0.1e9)
    assert freqs[-1] == pytest.approx(4.0e9)


def test_validate_plan():
    plan = band_plan(step_period=2 * PERIOD)
    assert not plan.validated
    assert validate_plan(plan, PERIOD) == 2
    assert plan.period_multiple_m == 2

    with pytest.raises(PeriodMismatch):
        validate_plan(band_plan(step_period=1.5 * PERIOD), PERIOD)
    with pytest.raises(PeriodMismatch):
        validate_plan(band_plan(step_period=0.5 * PERIOD), PERIOD)
    declared = SfcwPlan(50e6, 25e6, 2 * PERIOD, 5, period_multiple_m=3)
    with pytest.raises(PeriodMismatch):
        validate_plan(declared, PERIOD)
    with pytest.raises(ConfigInvalid):
        validate_plan(band_plan(), 0.0)


def test_step_index_range():
    plan = band_plan()
    assert plan.step_frequency(1) == pytest.approx(50e6)
    for n in (0, plan.n_steps + 1):
        with pytest.raises(IndexOutOfRange):
            plan.step_frequency(n)


# ═══════════════════════════════════════════════════════════════════════════════
# Group 2: Drive and record
# ═══════════════════════════════════════════════════════════════════════════════

def test_step_drive():
    sut = synthesize(Tone(150e6, PERIOD), FS)
    plan = band_plan(step_period=2 * PERIOD)
    drive = step_drive(sut, 0.1e9, plan)
    tiled = tile_periodic(sut, 2)
    assert drive.n_samples == tiled.n_samples
    assert np.max(np.abs(drive.samples - tiled.samples)) == pytest.approx(2.0)

    with pytest.raises(PeriodMismatch):
        step_drive(synthesize(Tone(150e6, 1.2e-6), FS), 0.1e9, plan)


def test_unvalidated_plan_rejected(config):
    sut = synthesize(Tone(150e6, PERIOD), FS)
    with pytest.raises(PlanNotValidated):
        run_time_division(sut, 0.1e9, band_plan(), config)


def test_record_length(config):
    trace = _small_run(config, n_scans=2)
    assert trace.plan.n_steps == 5
    assert trace.step_samples == 4000
    assert trace.detected.n_samples == 2 * 5 * 4000
    np.testing.assert_allclose(trace.measured_freqs_hz, [0.1e9, 0.125e9, 0.15e9, 0.175e9, 0.2e9])
    with pytest.raises(ConfigInvalid):
        _small_run(config, n_scans=0)


def test_noise_reproducible():
    noisy = LinkConfig(noise_rms=0.05, rng_seed=11)
    first = _small_run(noisy, n_scans=2)
    again = _small_run(noisy, n_scans=2, n_jobs=2)
    other = _small_run(noisy.with_seed(12), n_scans=2)
    np.testing.assert_array_equal(first.detected.samples, again.detected.samples)
    assert not np.array_equal(first.detected.samples, other.detected.samples)
    # each scan draws its own noise
    scan = first.scan_samples
    assert not np.array_equal(first.detected.samples[:scan], first.detected.samples[scan:])


def test_acquisition_offset_rotates_record(config):
    aligned = _small_run(config)
    shifted = _small_run(config, acquisition_offset_s=3.5e-6)
    assert shifted.offset_samples == 7000
    np.testing.assert_allclose(shifted.detected.samples,
                               np.roll(aligned.detected.samples, -7000))


# ═══════════════════════════════════════════════════════════════════════════════
# Group 3: Mapping
# ═══════════════════════════════════════════════════════════════════════════════

def test_tone_sidelines():
    plan = band_plan(0.3e9, 0.55e9, 5e6)
    spectrogram, _, _ = time_division_spectrogram(Tone(0.45e9, PERIOD), plan)
    freqs = spectrogram.freq_axis_hz
    means = spectrogram.intensity.mean(axis=1)
    peak = int(np.argmax(means))
    assert freqs[peak] == pytest.approx(0.45e9)

    above = means[(freqs >= 0.45e9 - 1) & (freqs <= 0.45e9 + GAMMA + 1)]
    below = means[(freqs >= 0.45e9 - GAMMA - 1) & (freqs <= 0.45e9 + 1)][::-1]
    assert np.all(np.diff(above) < 0)
    assert np.all(np.diff(below) < 0)

    far = (np.abs(freqs - 0.45e9) > 3 * GAMMA) & (np.abs(freqs - 0.3e9) > 3 * GAMMA)
    assert far.any()
    assert np.all(means[far] <= 0.01)


def test_reference_rows_removed():
    plan = band_plan(0.3e9, 0.55e9, 5e6)
    spectrogram, trace, _ = time_division_spectrogram(Tone(0.45e9, PERIOD), plan)
    assert trace.reference_freq_hz == pytest.approx(0.3e9)
    assert spectrogram.freq_axis_hz[0] > 0.3e9 + 1.5 * GAMMA
    assert spectrogram.shape[0] == plan.n_steps - 7
    assert plan.period_multiple_m == 1
