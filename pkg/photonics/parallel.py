"""
Parallel Link - N branches, each shifted so that one frequency bin meets the
shared SBS gain; branch outputs stack directly into a spectrogram.
"""
from typing import List, Optional
import logging

import numpy as np
from joblib import Parallel, delayed

from models.errors import IndexOutOfRange, NyquistViolation
from models.link_config import LinkConfig
from models.plans import BranchPlan, ShiftDirection
from models.spectrogram import Spectrogram
from models.waveforms import SampledSignal
from photonics.link import (
    apply_sbs, decimate_rows, gain_bypassed_baseline, link_latency_s, modulate_cs_dsb,
    output_time_axis, photodetect, pump_gain_profile, shift_cs_ssb, unit_carrier
)

logger = logging.getLogger(__name__)


def branch_frequency(plan: BranchPlan, k: int) -> float:
    """Frequency measured by 0-based branch k: f_base ± k·Δf"""
    if not 0 <= k < plan.n_branches:
        raise IndexOutOfRange(f"branch {k} outside 0..{plan.n_branches - 1}")
    return plan.f_base_hz + plan.direction.sign * k * plan.delta_f_hz


def branch_frequencies(plan: BranchPlan) -> np.ndarray:
    return np.array([branch_frequency(plan, k) for k in range(plan.n_branches)])


def _simulate_branch(k: int, sut: SampledSignal, plan: BranchPlan, config: LinkConfig,
                     baseline: np.ndarray, seed: np.random.SeedSequence,
                     jitter_hz: float) -> np.ndarray:
    fs = sut.sample_rate_hz
    carrier = unit_carrier(sut.n_samples, fs)
    # carrier offset that puts branch k's frequency on the gain center
    offset = config.gain_center_hz - branch_frequency(plan, k) + jitter_hz
    direction = ShiftDirection.UP if offset >= 0 else ShiftDirection.DOWN
    probe = shift_cs_ssb(carrier, abs(offset), direction)
    probe = modulate_cs_dsb(probe, sut, config.modulation_index)
    detected = photodetect(apply_sbs(probe, pump_gain_profile(config)), config, seed=seed)
    row = np.clip(detected.samples - baseline, 0.0, None)
    return np.clip(decimate_rows(row, fs, config.output_rate), 0.0, None)


def run_parallel(sut: SampledSignal, plan: BranchPlan, config: LinkConfig,
                 n_jobs: int = 1, drop_branches: Optional[List[int]] = None,
                 sweep_rate_hz_per_s: float = 0.0) -> Spectrogram:
    """
    Simulate the parallel multi-branch link.

    Rows are baseline-subtracted, clipped at zero and decimated to the
    configured output rate; rows are ordered by increasing frequency.

    Args:
        sut: SUT record, treated as periodic
        plan: branch grid
        config: link settings shared by every branch
        n_jobs: joblib workers for the independent branches
        drop_branches: branches left unsimulated (their rows stay zero)
        sweep_rate_hz_per_s: typical SUT sweep rate, sets the annotated latency

    Returns:
        Unnormalized Spectrogram annotated with the link latency
    """
    fs = sut.sample_rate_hz
    freqs = branch_frequencies(plan)
    offsets = config.gain_center_hz - freqs
    if np.any(np.abs(offsets) >= fs / 2):
        raise NyquistViolation(
            f"branch carrier offsets up to {np.max(np.abs(offsets)):.6g} Hz exceed fs/2 = {fs / 2:.6g} Hz"
        )
    drop = set(drop_branches or [])

    baseline = gain_bypassed_baseline(
        modulate_cs_dsb(unit_carrier(sut.n_samples, fs), sut, config.modulation_index), config
    ).samples
    # one noise stream per branch plus one for the frequency jitter
    seeds = np.random.SeedSequence(config.rng_seed).spawn(plan.n_branches + 1)
    jitter = np.zeros(plan.n_branches)
    if config.branch_jitter_hz > 0:
        jitter = np.random.default_rng(seeds[-1]).normal(
            0.0, config.branch_jitter_hz, plan.n_branches)
    logger.info("parallel run: %d branches x %d samples, %d job(s)", plan.n_branches, sut.n_samples, n_jobs)

    active = [k for k in range(plan.n_branches) if k not in drop]
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_simulate_branch)(k, sut, plan, config, baseline, seeds[k], float(jitter[k]))
        for k in active
    )
    n_columns = rows[0].size if rows else decimate_rows(baseline, fs, config.output_rate).size
    intensity = np.zeros((plan.n_branches, n_columns))
    for k, row in zip(active, rows):
        intensity[k] = row

    order = np.argsort(freqs)
    return Spectrogram(
        intensity=intensity[order],
        freq_axis_hz=freqs[order],
        time_axis_s=output_time_axis(n_columns, sut.duration_s, sut.t0_s),
        latency_s=link_latency_s(config, fs, sweep_rate_hz_per_s)
    )
