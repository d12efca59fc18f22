"""
Oracle Analysis - independent ground truth for both links.

STFT spectrograms, the two-tone resolvability metric, ridge statistics and
the minimum-resolvable-separation sweep.
"""
from dataclasses import dataclass, asdict, fields, replace
from enum import Enum
from typing import Any, Dict, Optional, Sequence
import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from models.errors import (
    ConfigInvalid, EmptyOverlap, FrequencyOutOfAxis, LengthMismatch, NoneResolved, SignalTooShort
)
from models.link_config import LinkConfig
from models.plans import SfcwPlan
from models.spectrogram import Spectrogram
from models.waveforms import MultiTone, SampledSignal, SignalSpec, synthesize
from analysis.reconstruction import reconstruct, ridge
from photonics.time_division import measured_frequencies, run_time_division, validate_plan

logger = logging.getLogger(__name__)

# valley-to-lesser-peak ratio below which two tones count as resolved (-3 dB)
RESOLVED_VALLEY_RATIO = 0.5

DEFAULT_SEPARATION_GRID_HZ = tuple(np.arange(5e6, 200e6 + 1, 5e6))


class WindowFunction(Enum):
    HANN = "hann"
    RECTANGULAR = "rectangular"

    @property
    def scipy_name(self) -> str:
        return "boxcar" if self is WindowFunction.RECTANGULAR else "hann"


@dataclass(frozen=True)
class StftParams:
    window_len_samples: int = 512
    hop_samples: int = 128
    window_fn: WindowFunction = WindowFunction.HANN

    def __post_init__(self):
        if not isinstance(self.window_fn, WindowFunction):
            try:
                object.__setattr__(self, 'window_fn', WindowFunction(self.window_fn))
            except ValueError:
                raise ConfigInvalid(f"window_fn must be 'hann' or 'rectangular', got {self.window_fn!r}")
        if int(self.window_len_samples) < 2:
            raise ConfigInvalid(f"window must span at least 2 samples, got {self.window_len_samples}")
        if not 1 <= int(self.hop_samples) <= int(self.window_len_samples):
            raise ConfigInvalid(
                f"hop must lie in 1..{self.window_len_samples}, got {self.hop_samples}"
            )
        object.__setattr__(self, 'window_len_samples', int(self.window_len_samples))
        object.__setattr__(self, 'hop_samples', int(self.hop_samples))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['window_fn'] = self.window_fn.value
        return data

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "StftParams":
        data = dict(data or {})
        unknown = sorted(set(data) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigInvalid(f"unknown oracle keys: {unknown}")
        return cls(**data)


@dataclass(frozen=True)
class ResolvabilityResult:
    resolved: bool
    valley_ratio: float

    def to_dict(self) -> Dict[str, Any]:
        return {'resolved': self.resolved, 'valleyRatio': self.valley_ratio}


@dataclass(frozen=True)
class RidgeComparison:
    median_abs_err_hz: float
    coverage_fraction: float

    def to_dict(self) -> Dict[str, float]:
        return {'medianAbsErrHz': self.median_abs_err_hz, 'coverageFraction': self.coverage_fraction}


# ============================================================================
# STFT
# ============================================================================

def stft(sig: SampledSignal, params: StftParams = StftParams(), normalize: bool = True) -> Spectrogram:
    """
    Magnitude-squared short-time Fourier transform.

    One-sided intensities are scaled so that, for a rectangular window with
    hop = window, the matrix sums to the signal energy. The time axis holds
    frame centers.

    Args:
        sig: real waveform
        params: window length, hop and window function
        normalize: scale to unit global maximum

    Returns:
        Spectrogram over rfft bins x frames
    """
    n = params.window_len_samples
    if sig.n_samples < n:
        raise SignalTooShort(f"signal of {sig.n_samples} samples is shorter than the {n}-sample window")
    window = sps.get_window(params.window_fn.scipy_name, n)
    frames = sliding_window_view(sig.samples, n)[::params.hop_samples]
    spectrum = np.fft.rfft(frames * window, axis=-1)

    weights = np.full(spectrum.shape[-1], 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    intensity = (weights * np.abs(spectrum) ** 2 / n).T

    fs = sig.sample_rate_hz
    centers = sig.t0_s + (np.arange(frames.shape[0]) * params.hop_samples + n / 2) / fs
    result = Spectrogram(intensity=intensity, freq_axis_hz=np.fft.rfftfreq(n, d=1.0 / fs),
                         time_axis_s=centers)
    logger.debug("stft: %d bins x %d frames", *result.shape)
    return result.normalized() if normalize else result


# ============================================================================
# Resolvability
# ============================================================================

def _nearest_row(axis: np.ndarray, f_hz: float) -> int:
    return int(np.argmin(np.abs(axis - f_hz)))


def two_tone_resolvability(spec: Spectrogram, f_a_hz: float, f_b_hz: float) -> ResolvabilityResult:
    """
    Decide whether two tones show as separate lines.

    Per time column, the brightest row near each tone is taken as its peak;
    the valley is the dimmest row strictly between the peaks divided by the
    lesser peak (1 when the peaks are adjacent). The ratio is averaged over
    columns where both peaks are lit.
    """
    axis = spec.freq_axis_hz
    if f_a_hz == f_b_hz:
        raise FrequencyOutOfAxis("the two tones coincide")
    half_bin = spec.bin_spacing_hz / 2
    for f in (f_a_hz, f_b_hz):
        if axis.size == 0 or not axis[0] - half_bin <= f <= axis[-1] + half_bin:
            raise FrequencyOutOfAxis(f"{f:.6g} Hz outside the frequency axis")

    i_a, i_b = sorted((_nearest_row(axis, f_a_hz), _nearest_row(axis, f_b_hz)))
    if i_a == i_b:
        return ResolvabilityResult(False, 1.0)
    reach = max(1, (i_b - i_a) // 2)
    mid = (i_a + i_b) // 2
    lo_a, hi_a = max(0, i_a - reach), min(mid, i_a + reach)
    lo_b, hi_b = max(mid + 1, i_b - reach), min(axis.size - 1, i_b + reach)

    ratios = []
    for column in spec.intensity.T:
        p_a = lo_a + int(np.argmax(column[lo_a:hi_a + 1]))
        p_b = lo_b + int(np.argmax(column[lo_b:hi_b + 1]))
        lesser = min(column[p_a], column[p_b])
        if lesser <= 0:
            continue
        if p_b - p_a <= 1:
            ratios.append(1.0)
        else:
            ratios.append(float(column[p_a + 1:p_b].min() / lesser))

    ratio = float(np.mean(ratios)) if ratios else 1.0
    return ResolvabilityResult(ratio < RESOLVED_VALLEY_RATIO, ratio)


# ============================================================================
# Ridges
# ============================================================================

def resample_ridge(ridge_hz: np.ndarray, time_axis_s: np.ndarray,
                   target_axis_s: np.ndarray) -> np.ndarray:
    """Nearest-neighbour resampling of a ridge onto another time grid"""
    ridge_hz = np.asarray(ridge_hz, dtype=float)
    time_axis_s = np.asarray(time_axis_s, dtype=float)
    if ridge_hz.size != time_axis_s.size:
        raise LengthMismatch(f"ridge has {ridge_hz.size} points, time axis {time_axis_s.size}")
    target = np.asarray(target_axis_s, dtype=float)
    nearest = np.argmin(np.abs(time_axis_s[:, None] - target[None, :]), axis=0)
    return ridge_hz[nearest]


def compare_ridges(a: Sequence[float], b: Sequence[float]) -> RidgeComparison:
    """Median |a - b| over the columns where both ridges exist"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"ridges of {a.size} and {b.size} columns; resample first")
    both = np.isfinite(a) & np.isfinite(b)
    if not both.any():
        raise EmptyOverlap("the ridges share no column")
    return RidgeComparison(float(np.median(np.abs(a[both] - b[both]))), float(both.mean()))


def _truth(spec: SignalSpec, time_axis_s: np.ndarray, latency_s: float,
           wrap_window_s: float = 0.0) -> np.ndarray:
    """Ground-truth frequencies (candidates x columns) seen at each column.

    Columns within wrap_window_s of a period boundary may show the frequencies
    of either side of it, so both are added as candidates there.
    """
    phase = np.mod(np.asarray(time_axis_s, dtype=float) - latency_s, spec.period)
    truth = spec.frequencies(phase)
    if wrap_window_s <= 0:
        return truth
    near = (phase < wrap_window_s) | (phase > spec.period - wrap_window_s)
    edges = spec.frequencies(np.array([0.0, np.nextafter(spec.period, 0.0)]))
    return np.vstack([truth,
                      np.where(near, edges[:, :1], truth),
                      np.where(near, edges[:, 1:], truth)])


def ridge_truth_errors(ridge_hz: np.ndarray, time_axis_s: np.ndarray, spec: SignalSpec,
                       latency_s: float = 0.0, wrap_window_s: float = 0.0) -> np.ndarray:
    """Distance from each ridge point to the nearest true component (NaN where no ridge)"""
    truth = _truth(spec, time_axis_s, latency_s, wrap_window_s)
    return np.min(np.abs(truth - np.asarray(ridge_hz, dtype=float)), axis=0)


def ridge_coverage(spectrogram: Spectrogram, spec: SignalSpec, tolerance_bins: int = 1,
                   power_floor: float = 0.0, wrap_window_s: float = 0.0) -> float:
    """Fraction of columns whose ridge row is within tolerance_bins rows of a true component"""
    if spectrogram.shape[0] == 0 or spectrogram.shape[1] == 0:
        return 0.0
    estimate = ridge(spectrogram, power_floor)
    axis = spectrogram.freq_axis_hz
    truth = _truth(spec, spectrogram.time_axis_s, spectrogram.latency_s, wrap_window_s)
    truth_rows = np.argmin(np.abs(axis[:, None, None] - truth[None]), axis=0)
    lit = np.isfinite(estimate)
    ridge_rows = np.searchsorted(axis, np.where(lit, estimate, axis[0]))
    distance = np.min(np.abs(truth_rows - ridge_rows), axis=0)
    return float(np.mean(lit & (distance <= tolerance_bins)))


def ridge_rms_error_hz(spectrogram: Spectrogram, spec: SignalSpec, power_floor: float = 0.0,
                       wrap_window_s: float = 0.0) -> float:
    errors = ridge_truth_errors(ridge(spectrogram, power_floor), spectrogram.time_axis_s,
                                spec, spectrogram.latency_s, wrap_window_s)
    if not np.isfinite(errors).any():
        raise EmptyOverlap("the ridge is empty")
    return float(np.sqrt(np.nanmean(errors ** 2)))


# ============================================================================
# Minimum resolvable separation
# ============================================================================

def min_resolvable_separation(config: LinkConfig, plan_template: SfcwPlan,
                              search_grid_hz: Optional[Sequence[float]] = None,
                              f_a_hz: Optional[float] = None,
                              sample_rate_hz: float = 10e9,
                              reference_freq_hz: Optional[float] = None,
                              n_jobs: int = 1) -> float:
    """
    Smallest separation on the grid at which two tones come out resolved.

    Each trial runs a two-tone SUT (period = one step) through the
    time-division link and reconstruction. The grid is binary-searched,
    assuming resolvability grows with separation.

    Args:
        config: link settings
        plan_template: SFCW plan to scan with (copied, never mutated)
        search_grid_hz: candidate separations, 5-200 MHz in 5 MHz steps by default;
            separations that would put the upper tone above the top row are dropped
        f_a_hz: lower tone, the middle row of the plan by default
        sample_rate_hz: simulation sample rate
        reference_freq_hz: reference tone, the first measured frequency by default
        n_jobs: joblib workers for the steps of each run

    Returns:
        the smallest resolved separation in Hz
    """
    grid = np.sort(np.asarray(search_grid_hz if search_grid_hz is not None
                              else DEFAULT_SEPARATION_GRID_HZ, dtype=float))
    if grid.size == 0 or np.any(grid <= 0):
        raise ConfigInvalid("search grid must hold positive separations")
    freqs = measured_frequencies(plan_template, config)
    f_a = float(freqs[freqs.size // 2]) if f_a_hz is None else float(f_a_hz)
    grid = grid[f_a + grid <= freqs[-1] + plan_template.delta_step_hz / 2]
    if grid.size == 0:
        raise ConfigInvalid(f"no separation on the grid fits above {f_a:.6g} Hz in the plan")
    reference = float(freqs[0]) if reference_freq_hz is None else float(reference_freq_hz)
    period = plan_template.step_period_s

    def trial(separation: float) -> ResolvabilityResult:
        plan = replace(plan_template, period_multiple_m=None)
        validate_plan(plan, period)
        sut = synthesize(MultiTone((f_a, f_a + separation), period), sample_rate_hz)
        trace = run_time_division(sut, reference, plan, config, n_jobs=n_jobs)
        result = two_tone_resolvability(reconstruct(trace, config), f_a, f_a + separation)
        logger.info("separation %.4g MHz: valley ratio %.3f", separation / 1e6, result.valley_ratio)
        return result

    lo, hi = 0, grid.size - 1
    if not trial(grid[hi]).resolved:
        raise NoneResolved(f"two tones {grid[hi]:.6g} Hz apart are not resolved")
    while lo < hi:
        middle = (lo + hi) // 2
        if trial(grid[middle]).resolved:
            hi = middle
        else:
            lo = middle + 1
    return float(grid[lo])
