"""
Reconstruction - turn a time-division detector record into a spectrogram.

    1. find the wide and high pulse of the reference tone
    2. extract one SFCW scan starting at the reference's scan boundary
    3. cut the scan into steps
    4. stack the steps into a time x frequency matrix
"""
from typing import List, Optional, Tuple
import logging

import numpy as np

from models.errors import (
    InsufficientData, LengthIndivisible, LengthMismatch, NoReferenceFound
)
from models.link_config import LinkConfig
from models.plans import SfcwPlan
from models.spectrogram import PulseDetection, Spectrogram
from models.waveforms import SampledSignal
from photonics.link import decimate_rows, output_time_axis
from photonics.time_division import RawTrace, measured_frequencies

logger = logging.getLogger(__name__)

DEFAULT_MIN_HEIGHT_RATIO = 0.5
DEFAULT_MIN_WIDTH_RATIO = 2.0
# pulses are segmented at this fraction of the maximum when measuring widths
DETECTION_FLOOR_RATIO = 0.05
# a candidate aligned on sample 0 must be this close to the highest step level
WHOLE_STEP_RATIO = 0.95
# rows within this many gain bandwidths of the reference are dropped
REFERENCE_EXCLUSION_FWHM = 1.5


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """[start, stop) index pairs of the True runs of a boolean vector"""
    padded = np.concatenate([[False], np.asarray(mask, dtype=bool), [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def _excess(trace: RawTrace) -> np.ndarray:
    """Detector record minus the gain-bypassed baseline"""
    step = trace.step_samples
    n = trace.detected.n_samples
    if n % step:
        raise LengthIndivisible(f"record of {n} samples is not a whole number of {step}-sample steps")
    return trace.detected.samples - np.tile(trace.baseline.samples, n // step)


def _step_level(excess: np.ndarray, step: int) -> np.ndarray:
    """Mean of excess[i:i + step] for every alignment i"""
    total = np.concatenate([[0.0], np.cumsum(excess)])
    return (total[step:] - total[:-step]) / step


def _longest_run(mask: np.ndarray) -> int:
    runs = _runs(mask)
    return max((stop - start for start, stop in runs), default=0)


def find_reference_pulse(trace: RawTrace, min_height_ratio: float = DEFAULT_MIN_HEIGHT_RATIO,
                         min_width_ratio: float = DEFAULT_MIN_WIDTH_RATIO,
                         detection_floor: float = DETECTION_FLOOR_RATIO) -> PulseDetection:
    """
    Locate the earliest wide and high pulse of the reference tone.

    Heights are read from the one-step moving mean of the excess, so a beat
    between the reference and a SUT passing close to it cannot split the
    reference step. A candidate must reach min_height_ratio x the highest mean
    and, inside its step, stay above the detection floor for min_width_ratio x
    the median pulse width (at most one step, which a CW reference always
    fills). A candidate cut by the start of the record is skipped.
    """
    excess = _excess(trace)
    peak = float(excess.max())
    if not peak > 0:
        raise NoReferenceFound("detector record carries no pulse above the baseline")

    step = trace.step_samples
    lit = excess >= detection_floor * peak
    widths = [stop - start for start, stop in _runs(lit)]
    required = min(min_width_ratio * float(np.median(widths)), step)

    level = _step_level(excess, step)
    top = float(level.max())
    for start, stop in _runs(level >= min_height_ratio * top):
        aligned = start + int(np.argmax(level[start:stop]))
        if aligned == 0 and level[0] < WHOLE_STEP_RATIO * top:
            continue
        width = _longest_run(lit[aligned:aligned + step])
        if width >= required:
            height = float(level[aligned])
            logger.debug("reference step at %d, width %d, level %.4g", aligned, width, height)
            return PulseDetection(center_index=aligned + step // 2, width_samples=width, height=height)
    raise NoReferenceFound(
        f"no step reaches {min_height_ratio:.2f} x the highest level with width >= {required:.0f} samples"
    )


def extract_frame(trace: RawTrace, anchor: PulseDetection) -> SampledSignal:
    """One full SFCW scan starting at the scan boundary implied by the anchor"""
    step = trace.step_samples
    scan = trace.scan_samples
    reference_start = anchor.center_index - step // 2

    reference_step = int(np.argmin(np.abs(trace.measured_freqs_hz - trace.reference_freq_hz)))
    start = reference_start - reference_step * step
    if start < 0:
        start += scan
    if start < 0 or start + scan > trace.detected.n_samples:
        raise InsufficientData(
            f"scan starting at sample {start} needs {scan} samples, record has {trace.detected.n_samples}"
        )
    fs = trace.detected.sample_rate_hz
    return SampledSignal(trace.detected.samples[start:start + scan], fs,
                         trace.detected.t0_s + start / fs)


def _step_rows(frame: SampledSignal, plan: SfcwPlan,
               baseline: Optional[SampledSignal]) -> np.ndarray:
    n = frame.n_samples
    if n % plan.n_steps:
        raise LengthIndivisible(f"frame of {n} samples does not split into {plan.n_steps} steps")
    step = n // plan.n_steps
    rows = frame.samples.reshape(plan.n_steps, step)
    if baseline is not None:
        if baseline.n_samples != step:
            raise LengthMismatch(f"baseline has {baseline.n_samples} samples, steps have {step}")
        rows = rows - baseline.samples
    return rows


def segment_and_stack(frame: SampledSignal, plan: SfcwPlan, config: LinkConfig,
                      baseline: Optional[SampledSignal] = None,
                      reference_freq_hz: Optional[float] = None,
                      latency_s: float = 0.0) -> Spectrogram:
    """
    Cut a scan into steps and stack them into a normalized spectrogram.

    Args:
        frame: one full scan of detector samples
        plan: SFCW plan of the scan
        config: link settings (frequency mapping, output rate, gain bandwidth)
        baseline: gain-bypassed detector output of one step; without it the
            unmodulated-probe level (zero for a null-biased modulator) is used
        reference_freq_hz: reference tone frequency, the band edge f_1 by default
        latency_s: link latency recorded on the spectrogram

    Returns:
        Spectrogram with reference rows removed, normalized to its global maximum
    """
    rows = np.clip(_step_rows(frame, plan, baseline), 0.0, None)
    fs = frame.sample_rate_hz
    intensity = np.clip(decimate_rows(rows, fs, config.output_rate), 0.0, None)
    freqs = measured_frequencies(plan, config)
    if reference_freq_hz is None:
        reference_freq_hz = float(freqs[0])

    spectrogram = Spectrogram(
        intensity=intensity,
        freq_axis_hz=freqs,
        time_axis_s=output_time_axis(intensity.shape[1], rows.shape[1] / fs),
        latency_s=latency_s
    )
    near_reference = np.abs(freqs - reference_freq_hz) <= REFERENCE_EXCLUSION_FWHM * config.sbs_fwhm_hz
    logger.debug("dropping %d reference row(s)", int(near_reference.sum()))
    return spectrogram.without_rows(near_reference).normalized()


def reconstruct(trace: RawTrace, config: LinkConfig,
                min_height_ratio: float = DEFAULT_MIN_HEIGHT_RATIO,
                min_width_ratio: float = DEFAULT_MIN_WIDTH_RATIO) -> Spectrogram:
    """Full processing chain from a raw record to a normalized spectrogram"""
    anchor = find_reference_pulse(trace, min_height_ratio, min_width_ratio)
    frame = extract_frame(trace, anchor)
    return segment_and_stack(frame, trace.plan, config, baseline=trace.baseline,
                             reference_freq_hz=trace.reference_freq_hz,
                             latency_s=trace.latency_s)


def ridge(spec: Spectrogram, power_floor: float = 0.0) -> np.ndarray:
    """Per-column frequency of the brightest row; NaN where that row is below the floor.

    np.argmax returns the first maximum, so ties go to the lower frequency.
    """
    n_time = spec.shape[1]
    if spec.shape[0] == 0:
        return np.full(n_time, np.nan)
    rows = np.argmax(spec.intensity, axis=0)
    peaks = spec.intensity[rows, np.arange(n_time)]
    estimate = spec.freq_axis_hz[rows].astype(float)
    estimate[(peaks <= 0) | (peaks < power_floor)] = np.nan
    return estimate


def pulse_fwhm_s(spec: Spectrogram, min_row_ratio: float = 0.1) -> float:
    """Median full width at half maximum of the strongest pulse of each bright row"""
    if spec.intensity.size == 0 or spec.intensity.max() <= 0 or spec.shape[1] < 2:
        return float('nan')
    dt = float(np.median(np.diff(spec.time_axis_s)))
    global_max = spec.intensity.max()
    widths = []
    for row in spec.intensity:
        peak_index = int(np.argmax(row))
        peak = row[peak_index]
        if peak < min_row_ratio * global_max:
            continue
        above = row >= peak / 2
        if above.all():
            continue
        # walk outwards around the period from the peak
        left = right = 0
        while above[(peak_index - left - 1) % row.size]:
            left += 1
        while above[(peak_index + right + 1) % row.size]:
            right += 1
        widths.append((left + right + 1) * dt)
    return float(np.median(widths)) if widths else float('nan')


def period_segment_correlation(frame: SampledSignal, plan: SfcwPlan,
                               baseline: Optional[SampledSignal] = None,
                               min_energy_ratio: float = 0.01) -> float:
    """Smallest pairwise correlation between the m SUT-period segments of any bright step"""
    m = plan.period_multiple_m or 1
    rows = _step_rows(frame, plan, baseline)
    if m == 1:
        return 1.0
    if rows.shape[1] % m:
        raise LengthIndivisible(f"step of {rows.shape[1]} samples does not split into {m} periods")
    energy = np.sum(rows ** 2, axis=1)
    bright = energy >= min_energy_ratio * energy.max() if energy.max() > 0 else np.zeros_like(energy, bool)
    worst = 1.0
    for row in rows[bright]:
        segments = row.reshape(m, -1)
        if np.any(segments.std(axis=1) == 0):
            continue
        worst = min(worst, float(np.corrcoef(segments).min()))
    return worst
