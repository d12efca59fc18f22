"""
Photonic Link - complex-baseband models of the optical chain.

Samples of a ComplexEnvelope live on a fixed baseband frame whose zero is the
optical carrier f_c; ``carrier_offset_hz`` annotates where the nominal carrier
of the field currently sits on that frame.
"""
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Union
import logging
import math

import numpy as np
from scipy import signal

from models.errors import ConfigInvalid, LengthMismatch, NyquistViolation, RateMismatch
from models.link_config import LinkConfig, SbsGainProfile
from models.plans import ShiftDirection
from models.waveforms import SampledSignal

logger = logging.getLogger(__name__)

# sweeps slower than this x fwhm**2 are treated as quasi-static
QUASI_STATIC_SWEEP = 0.05
# calibration sweep spans +/- this many gain bandwidths around the center
SWEEP_SPAN_FWHM = 16.0


@dataclass(frozen=True, eq=False)
class ComplexEnvelope:
    """Complex optical field sampled around f_c"""
    samples: np.ndarray
    sample_rate_hz: float
    carrier_offset_hz: float = 0.0
    t0_s: float = 0.0

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ConfigInvalid(f"sample rate must be positive, got {self.sample_rate_hz}")
        samples = np.array(self.samples, dtype=complex)
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)

    @property
    def n_samples(self) -> int:
        return int(self.samples.size)

    def times(self) -> np.ndarray:
        return self.t0_s + np.arange(self.n_samples) / self.sample_rate_hz

    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))


def unit_carrier(n_samples: int, sample_rate_hz: float) -> ComplexEnvelope:
    """Unmodulated optical carrier of unit amplitude at f_c"""
    return ComplexEnvelope(np.ones(n_samples, dtype=complex), sample_rate_hz)


# ============================================================================
# Modulators
# ============================================================================

def modulate_cs_dsb(carrier: ComplexEnvelope, drive: SampledSignal,
                    modulation_index: float) -> ComplexEnvelope:
    """Null-biased MZM: E_out = E_in * sin(index * pi/2 * v), v = drive / max|drive|"""
    if carrier.sample_rate_hz != drive.sample_rate_hz:
        raise RateMismatch(
            f"carrier at {carrier.sample_rate_hz} Hz, drive at {drive.sample_rate_hz} Hz"
        )
    if carrier.n_samples != drive.n_samples:
        raise LengthMismatch(f"carrier has {carrier.n_samples} samples, drive {drive.n_samples}")
    peak = float(np.max(np.abs(drive.samples)))
    v = drive.samples / peak if peak > 0 else np.zeros_like(drive.samples)
    return replace(carrier, samples=carrier.samples * np.sin(modulation_index * np.pi / 2 * v))


def shift_cs_ssb(field: ComplexEnvelope, shift_hz: float,
                 direction: Union[ShiftDirection, str] = ShiftDirection.UP) -> ComplexEnvelope:
    """Ideal single-sideband frequency shifter (DP-MZM with infinite sideband suppression)"""
    direction = ShiftDirection(direction)
    offset = field.carrier_offset_hz + direction.sign * shift_hz
    if abs(offset) >= field.sample_rate_hz / 2:
        raise NyquistViolation(
            f"shifted carrier at {offset:.6g} Hz leaves the +/-{field.sample_rate_hz / 2:.6g} Hz band"
        )
    if shift_hz == 0:
        return field
    rotation = np.exp(2j * np.pi * direction.sign * shift_hz * field.times())
    return replace(field, samples=field.samples * rotation, carrier_offset_hz=offset)


# ============================================================================
# SBS gain
# ============================================================================

def _gain_exponent(profile: SbsGainProfile) -> float:
    """g = ln(10^(peak_gain_db / 10))"""
    return profile.peak_gain_db / 10.0 * math.log(10.0)


def sbs_gain_response(profile: SbsGainProfile, detuning_hz):
    """Complex field gain H = exp((g/2) / (1 + 2j * detuning / fwhm))"""
    g = _gain_exponent(profile)
    detuning = np.asarray(detuning_hz, dtype=float)
    response = np.exp((g / 2) / (1 + 2j * detuning / profile.fwhm_hz))
    return response if response.ndim else complex(response)


def apply_sbs(probe: ComplexEnvelope, profile: SbsGainProfile) -> ComplexEnvelope:
    """Steady-state SBS interaction as a pointwise filter on the probe spectrum"""
    fs = probe.sample_rate_hz
    if abs(profile.center_offset_hz) >= fs / 2:
        raise NyquistViolation(
            f"gain center {profile.center_offset_hz:.6g} Hz outside the +/-{fs / 2:.6g} Hz band"
        )
    freqs = np.fft.fftfreq(probe.n_samples, d=1.0 / fs)
    # detuning to the nearest alias of the gain center
    detuning = np.mod(freqs - profile.center_offset_hz + fs / 2, fs) - fs / 2
    spectrum = np.fft.fft(probe.samples) * sbs_gain_response(profile, detuning)
    return replace(probe, samples=np.fft.ifft(spectrum))


def sbs_group_delay_s(profile: SbsGainProfile, detuning_hz: float = 0.0) -> float:
    """Group delay of the gain filter at a detuning from its center (g / (2 pi fwhm) on the line)"""
    g = _gain_exponent(profile)
    x = 2.0 * detuning_hz / profile.fwhm_hz
    return g * (1 - x ** 2) / (2 * np.pi * profile.fwhm_hz * (1 + x ** 2) ** 2)


@lru_cache(maxsize=64)
def swept_gain_delay_s(profile: SbsGainProfile, lpf_hz: float, sweep_rate_hz_per_s: float = 0.0) -> float:
    """
    Delay from a swept tone crossing the gain center to the peak of its
    detected excess intensity, detector filter delay excluded.

    A unit chirp clipped to +/-SWEEP_SPAN_FWHM bandwidths around the gain is
    amplified, then square-law detected through the detector low-pass; the
    ridge of a reconstructed spectrogram follows this peak. Sweeps slower than
    QUASI_STATIC_SWEEP x fwhm^2 run at that rate, where the delay settles on
    the line-center group delay.
    """
    gamma = profile.fwhm_hz
    rate = max(abs(float(sweep_rate_hz_per_s)), QUASI_STATIC_SWEEP * gamma ** 2)
    fs = max(128.0 * gamma, 4.0 * lpf_hz)
    span = SWEEP_SPAN_FWHM * gamma
    settle = 20.0 / (np.pi * gamma)
    half = span / rate + 2 * settle
    n = 2 * int(math.ceil(half * fs))
    t = (np.arange(n) - n // 2) / fs

    chirp = np.exp(2j * np.pi * np.cumsum(np.clip(rate * t, -span, span)) / fs)
    response = sbs_gain_response(profile, np.fft.fftfreq(n, d=1.0 / fs))
    amplified = np.fft.ifft(np.fft.fft(chirp) * response)
    taps = detector_taps(lpf_hz, fs)
    excess = _circular_lowpass(np.abs(amplified) ** 2 - 1.0, taps)

    # the record wraps at its ends
    inner = np.flatnonzero(np.abs(t) <= half - settle)
    i = int(inner[np.argmax(excess[inner])])
    left, centre, right = excess[i - 1], excess[i], excess[i + 1]
    curvature = left - 2 * centre + right
    offset = 0.5 * (left - right) / curvature if curvature < 0 else 0.0
    delay = t[i] + offset / fs - (taps.size - 1) / 2 / fs
    logger.debug("swept gain delay at %.4g Hz/s: %.4g s", rate, delay)
    return float(delay)


def pump_gain_profile(config: LinkConfig) -> SbsGainProfile:
    """Gain profile created by a pump shifted f_pump_offset above f_c"""
    return config.gain_profile()


# ============================================================================
# Detection
# ============================================================================

@lru_cache(maxsize=32)
def detector_taps(lpf_hz: float, sample_rate_hz: float) -> np.ndarray:
    """Linear-phase FIR low-pass of the photodetector (unit DC gain)"""
    half = int(math.ceil(2 * sample_rate_hz / lpf_hz))
    taps = signal.firwin(2 * half + 1, lpf_hz, fs=sample_rate_hz)
    taps.setflags(write=False)
    return taps


def detector_delay_s(config: LinkConfig, sample_rate_hz: float) -> float:
    taps = detector_taps(config.lpf_hz, sample_rate_hz)
    return (taps.size - 1) / 2 / sample_rate_hz


def link_latency_s(config: LinkConfig, sample_rate_hz: float, sweep_rate_hz_per_s: float = 0.0) -> float:
    """Delay from a SUT frequency crossing the gain to the peak of its detected pulse"""
    return detector_delay_s(config, sample_rate_hz) + swept_gain_delay_s(
        config.gain_profile(), config.lpf_hz, float(sweep_rate_hz_per_s))


def _circular_lowpass(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    n = x.size
    # fold taps longer than the record onto it (circular convolution)
    kernel = np.bincount(np.arange(taps.size) % n, weights=taps, minlength=n)
    return np.fft.irfft(np.fft.rfft(x) * np.fft.rfft(kernel), n=n)


def photodetect(field: ComplexEnvelope, config: LinkConfig,
                seed: Optional[Union[int, np.random.SeedSequence]] = None) -> SampledSignal:
    """
    Square-law detection followed by the detector low-pass and additive noise.

    The record is treated as periodic, consistent with the periodic SUT model.

    Args:
        field: optical field at the photodetector
        config: link settings (low-pass cutoff, noise level, seed)
        seed: noise seed overriding config.rng_seed (per step / branch)

    Returns:
        Raw detector trace (no baseline subtraction)
    """
    fs = field.sample_rate_hz
    if not config.lpf_hz < fs / 2:
        raise NyquistViolation(f"detector cutoff {config.lpf_hz:.6g} Hz >= fs/2 = {fs / 2:.6g} Hz")
    intensity = np.abs(field.samples) ** 2
    detected = _circular_lowpass(intensity, detector_taps(config.lpf_hz, fs))
    if config.noise_rms > 0:
        rng = np.random.default_rng(config.rng_seed if seed is None else seed)
        detected = detected + rng.normal(0.0, config.noise_rms, detected.size)
    return SampledSignal(detected, fs, field.t0_s)


def gain_bypassed_baseline(field: ComplexEnvelope, config: LinkConfig) -> SampledSignal:
    """Noise-free detector output of a field that never meets the SBS gain"""
    return photodetect(field, replace(config, noise_rms=0.0))


# ============================================================================
# Output sampling
# ============================================================================

def decimate_rows(rows: np.ndarray, sample_rate_hz: float, output_rate_hz: float) -> np.ndarray:
    """Anti-aliased periodic resampling of detector rows (last axis) to the output column rate"""
    rows = np.asarray(rows, dtype=float)
    n_in = rows.shape[-1]
    n_out = max(1, int(round(n_in * output_rate_hz / sample_rate_hz)))
    if n_out >= n_in:
        return rows
    return signal.resample(rows, n_out, axis=-1)


def output_time_axis(n_columns: int, duration_s: float, t0_s: float = 0.0) -> np.ndarray:
    return t0_s + np.arange(n_columns) * (duration_s / n_columns)
