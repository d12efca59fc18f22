"""
Time-Division Link - SFCW-scanned measurement with one fixed SBS gain.

For step n the probe carrier is shifted down by f_step_n, CS-DSB-modulated by
SUT + reference, amplified where its upper sideband meets the gain at
f_pump - f_SBS, and detected. Steps are simulated independently with the SUT
phase restarted each step, which is exact for periodic SUTs whose period
divides the step period.
"""
from dataclasses import dataclass
from typing import List, Sequence
import logging

import numpy as np
from joblib import Parallel, delayed

from models.errors import ConfigInvalid, PeriodMismatch, PlanNotValidated
from models.link_config import LinkConfig
from models.plans import SfcwPlan, ShiftDirection
from models.waveforms import (
    SampledSignal, period_sample_count, reference_tone, sum_signals, tile_periodic
)
from photonics.link import (
    apply_sbs, gain_bypassed_baseline, link_latency_s, modulate_cs_dsb,
    photodetect, pump_gain_profile, shift_cs_ssb, unit_carrier
)

logger = logging.getLogger(__name__)

# relative tolerance of the T_step = m * T_s check
PERIOD_RTOL = 1e-9

# reference amplitude relative to the SUT peak
REFERENCE_TO_SUT_AMPLITUDE = 2.0


@dataclass(frozen=True, eq=False)
class RawTrace:
    """Detector record of a time-division run.

    ``detected`` spans n_scans scans and starts ``offset_samples`` into the
    periodic scan; ``baseline`` is the gain-bypassed detector output of one
    step (identical for every step).
    """
    detected: SampledSignal
    plan: SfcwPlan
    measured_freqs_hz: np.ndarray
    reference_freq_hz: float
    baseline: SampledSignal
    latency_s: float = 0.0
    n_scans: int = 1
    offset_samples: int = 0

    @property
    def step_samples(self) -> int:
        return self.baseline.n_samples

    @property
    def scan_samples(self) -> int:
        return self.step_samples * self.plan.n_steps


def validate_plan(plan: SfcwPlan, sut_period_s: float) -> int:
    """Check T_step = m * T_s for a positive integer m and store m in the plan"""
    if not sut_period_s > 0:
        raise ConfigInvalid(f"SUT period must be positive, got {sut_period_s}")
    ratio = plan.step_period_s / sut_period_s
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > PERIOD_RTOL * ratio:
        raise PeriodMismatch(
            f"step period {plan.step_period_s} s is {ratio:.6g} x the SUT period {sut_period_s} s"
        )
    if plan.period_multiple_m is not None and plan.period_multiple_m != m:
        raise PeriodMismatch(f"plan declares m = {plan.period_multiple_m}, periods give m = {m}")
    plan.period_multiple_m = m
    return m


def measured_frequency(plan: SfcwPlan, n: int, config: LinkConfig) -> float:
    """f_n = f_step1 + (n - 1) * delta_step + (f_pump - f_SBS)"""
    return plan.step_frequency(n) + config.gain_center_hz


def measured_frequencies(plan: SfcwPlan, config: LinkConfig) -> np.ndarray:
    steps = np.arange(plan.n_steps)
    return plan.f_step1_hz + steps * plan.delta_step_hz + config.gain_center_hz


def step_drive(sut: SampledSignal, reference_freq_hz: float, plan: SfcwPlan) -> SampledSignal:
    """SUT tiled over one step period plus the reference tone (electrical coupler output)"""
    fs = sut.sample_rate_hz
    step_samples = period_sample_count(plan.step_period_s, fs)
    if step_samples % sut.n_samples:
        raise PeriodMismatch(
            f"SUT of {sut.n_samples} samples does not tile a {step_samples}-sample step"
        )
    tiled = tile_periodic(SampledSignal(sut.samples, fs, 0.0), step_samples // sut.n_samples)
    peak = float(np.max(np.abs(sut.samples)))
    amplitude = REFERENCE_TO_SUT_AMPLITUDE * peak if peak > 0 else 1.0
    return sum_signals(tiled, reference_tone(reference_freq_hz, amplitude, step_samples, fs))


def _simulate_step(n: int, drive: SampledSignal, plan: SfcwPlan, config: LinkConfig,
                   seeds: Sequence[np.random.SeedSequence]) -> np.ndarray:
    """Detector output of step n, one row per scan"""
    carrier = unit_carrier(drive.n_samples, drive.sample_rate_hz)
    probe = shift_cs_ssb(carrier, plan.step_frequency(n), ShiftDirection.DOWN)
    probe = modulate_cs_dsb(probe, drive, config.modulation_index)
    amplified = apply_sbs(probe, pump_gain_profile(config))
    logger.debug("step %d: carrier at %.6g Hz", n, probe.carrier_offset_hz)
    return np.vstack([photodetect(amplified, config, seed=seed).samples for seed in seeds])


def run_time_division(sut: SampledSignal, reference_freq_hz: float, plan: SfcwPlan,
                      config: LinkConfig, n_scans: int = 1, acquisition_offset_s: float = 0.0,
                      n_jobs: int = 1, sweep_rate_hz_per_s: float = 0.0) -> RawTrace:
    """
    Simulate the SFCW-scanned link.

    Args:
        sut: one SUT period, or one step period of SUT
        reference_freq_hz: frequency of the reference tone added to the SUT
        plan: SFCW plan already accepted by validate_plan
        config: link settings
        n_scans: number of complete scans in the detector record
        acquisition_offset_s: where in the periodic scan the record starts
        n_jobs: joblib workers for the independent steps
        sweep_rate_hz_per_s: typical SUT sweep rate, sets the annotated latency

    Returns:
        RawTrace with steps in order, n_scans x n_steps x step samples long
    """
    if not plan.validated:
        raise PlanNotValidated("run validate_plan before run_time_division")
    if int(n_scans) < 1:
        raise ConfigInvalid(f"n_scans must be a positive integer, got {n_scans}")
    n_scans = int(n_scans)

    fs = sut.sample_rate_hz
    drive = step_drive(sut, reference_freq_hz, plan)
    step_samples = drive.n_samples
    scan_samples = step_samples * plan.n_steps
    logger.info("time-division run: %d steps x %d samples, %d scan(s), %d job(s)",
                plan.n_steps, step_samples, n_scans, n_jobs)

    baseline = gain_bypassed_baseline(
        modulate_cs_dsb(unit_carrier(step_samples, fs), drive, config.modulation_index), config
    )
    children = np.random.SeedSequence(config.rng_seed).spawn(n_scans * plan.n_steps)
    step_rows: List[np.ndarray] = Parallel(n_jobs=n_jobs)(
        delayed(_simulate_step)(
            n, drive, plan, config,
            [children[scan * plan.n_steps + n - 1] for scan in range(n_scans)]
        )
        for n in range(1, plan.n_steps + 1)
    )

    # (steps, scans, samples) -> scans in time order, steps in order inside each scan
    record = np.stack(step_rows).transpose(1, 0, 2).reshape(-1)
    offset_samples = int(round(acquisition_offset_s * fs)) % scan_samples
    if offset_samples:
        record = np.roll(record, -offset_samples)

    return RawTrace(
        detected=SampledSignal(record, fs, 0.0),
        plan=plan,
        measured_freqs_hz=measured_frequencies(plan, config),
        reference_freq_hz=float(reference_freq_hz),
        baseline=baseline,
        latency_s=link_latency_s(config, fs, sweep_rate_hz_per_s),
        n_scans=n_scans,
        offset_samples=offset_samples
    )
