"""
Waveform Model - signals under test (SUT), reference tones and ground-truth
instantaneous-frequency laws.

All waveforms are unit amplitude; relative intensity enters downstream through
the modulation index.
"""
from dataclasses import dataclass
from typing import Any, ClassVar, Dict, FrozenSet, Optional, Sequence, Tuple
from enum import Enum
import logging

import numpy as np

from models.errors import (
    ConfigInvalid, InvalidSpec, LengthMismatch, NyquistViolation, OutOfRange, RateMismatch
)

logger = logging.getLogger(__name__)

DEFAULT_PERIOD_S = 2e-6
DEFAULT_SAMPLE_RATE_HZ = 10e9

# relative tolerance for "period × sample rate is an integer"
_SAMPLE_COUNT_RTOL = 1e-6


class SignalKind(Enum):
    TONE = "tone"
    MULTI_TONE = "multi_tone"
    LFM = "lfm"
    DUAL_CHIRP_LFM = "dual_chirp_lfm"
    NLFM = "nlfm"
    FREQUENCY_HOPPING = "frequency_hopping"
    STEP_FREQUENCY = "step_frequency"


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Real-valued RF waveform with a uniform sample rate and a start time"""
    samples: np.ndarray
    sample_rate_hz: float
    t0_s: float = 0.0

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 1:
            raise ConfigInvalid("a sampled signal needs a non-empty 1-D sample vector")
        if not self.sample_rate_hz > 0:
            raise ConfigInvalid(f"sample rate must be positive, got {self.sample_rate_hz}")
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate_hz', float(self.sample_rate_hz))
        object.__setattr__(self, 't0_s', float(self.t0_s))

    @property
    def n_samples(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def times(self) -> np.ndarray:
        return self.t0_s + np.arange(self.n_samples) / self.sample_rate_hz

    def with_samples(self, samples: np.ndarray) -> "SampledSignal":
        return SampledSignal(samples, self.sample_rate_hz, self.t0_s)


# ============================================================================
# Signal specifications
# ============================================================================

@dataclass(frozen=True)
class SignalSpec:
    """Base class of the tagged SUT variants.

    Subclasses provide the per-component frequency law (``frequencies``) and its
    integral (``phases``); both are vectorized over time within one period.
    """
    kind: ClassVar[SignalKind]

    @property
    def period(self) -> float:
        raise NotImplementedError

    def frequencies(self, t: np.ndarray) -> np.ndarray:
        """Instantaneous frequency of every component, shape (k, len(t))"""
        raise NotImplementedError

    def phases(self, t: np.ndarray) -> np.ndarray:
        """Instantaneous phase of every component in radians, shape (k, len(t))"""
        raise NotImplementedError

    def max_frequency_hz(self) -> float:
        t = np.linspace(0.0, self.period, 4097)
        return float(np.max(self.frequencies(t)))

    def sweep_rate_hz_per_s(self, n_points: int = 4096) -> float:
        """Median |df/dt| over one period and all components (0 for hops and tones)"""
        t = np.linspace(0.0, self.period, n_points + 1)
        slopes = np.abs(np.diff(self.frequencies(t), axis=1)) / (t[1] - t[0])
        return float(np.median(slopes))

    def to_dict(self) -> Dict[str, Any]:
        data = {'kind': self.kind.value}
        for name, value in self.__dict__.items():
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            data[name] = value
        return data

    def _check_common(self):
        if not self.period > 0:
            raise InvalidSpec(f"{self.kind.value}: period must be positive")
        t = np.linspace(0.0, self.period, 1025, endpoint=False)
        if np.any(self.frequencies(t) < 0):
            raise InvalidSpec(f"{self.kind.value}: frequencies must be non-negative")


@dataclass(frozen=True)
class Tone(SignalSpec):
    kind: ClassVar[SignalKind] = SignalKind.TONE
    f_hz: float
    period_s: float = DEFAULT_PERIOD_S

    def __post_init__(self):
        self._check_common()

    @property
    def period(self) -> float:
        return self.period_s

    def frequencies(self, t):
        t = np.asarray(t, dtype=float)
        return np.full((1, t.size), float(self.f_hz))

    def phases(self, t):
        t = np.asarray(t, dtype=float)
        return (2 * np.pi * self.f_hz * t)[np.newaxis, :]


@dataclass(frozen=True)
class MultiTone(SignalSpec):
    kind: ClassVar[SignalKind] = SignalKind.MULTI_TONE
    f_list: Tuple[float, ...]
    period_s: float = DEFAULT_PERIOD_S

    def __post_init__(self):
        object.__setattr__(self, 'f_list', tuple(float(f) for f in self.f_list))
        if not self.f_list:
            raise InvalidSpec("multi_tone: f_list is empty")
        self._check_common()

    @property
    def period(self) -> float:
        return self.period_s

    def frequencies(self, t):
        t = np.asarray(t, dtype=float)
        return np.repeat(np.asarray(self.f_list)[:, np.newaxis], t.size, axis=1)

    def phases(self, t):
        t = np.asarray(t, dtype=float)
        return 2 * np.pi * np.outer(self.f_list, t)


@dataclass(frozen=True)
class Lfm(SignalSpec):
    kind: ClassVar[SignalKind] = SignalKind.LFM
    f_start_hz: float
    f_end_hz: float
    period_s: float = DEFAULT_PERIOD_S

    def __post_init__(self):
        self._check_common()

    @property
    def period(self) -> float:
        return self.period_s

    @property
    def chirp_rate(self) -> float:
        return (self.f_end_hz - self.f_start_hz) / self.period_s

    def frequencies(self, t):
        t = np.asarray(t, dtype=float)
        return (self.f_start_hz + self.chirp_rate * t)[np.newaxis, :]

    def phases(self, t):
        t = np.asarray(t, dtype=float)
        return (2 * np.pi * (self.f_start_hz * t + 0.5 * self.chirp_rate * t ** 2))[np.newaxis, :]


@dataclass(frozen=True)
class DualChirpLfm(SignalSpec):
    """Up-chirp and down-chirp sharing one band and period"""
    kind: ClassVar[SignalKind] = SignalKind.DUAL_CHIRP_LFM
    f_start_hz: float
    f_end_hz: float
    period_s: float = DEFAULT_PERIOD_S

    def __post_init__(self):
        self._check_common()

    @property
    def period(self) -> float:
        return self.period_s

    def frequencies(self, t):
        t = np.asarray(t, dtype=float)
        rate = (self.f_end_hz - self.f_start_hz) / self.period_s
        return np.vstack([self.f_start_hz + rate * t, self.f_end_hz - rate * t])

    def phases(self, t):
        t = np.asarray(t, dtype=float)
        rate = (self.f_end_hz - self.f_start_hz) / self.period_s
        up = self.f_start_hz * t + 0.5 * rate * t ** 2
        down = self.f_end_hz * t - 0.5 * rate * t ** 2
        return 2 * np.pi * np.vstack([up, down])


@dataclass(frozen=True)
class Nlfm(SignalSpec):
    """Polynomial frequency law f(u) = sum(c_i * u**i), u = t / period.

    Without explicit coefficients the sweep is quadratic from f_start to f_end.
    """
    kind: ClassVar[SignalKind] = SignalKind.NLFM
    f_start_hz: float
    f_end_hz: float
    period_s: float = DEFAULT_PERIOD_S
    coefficients: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.coefficients is not None:
            coefficients = tuple(float(c) for c in self.coefficients)
            if not coefficients:
                raise InvalidSpec("nlfm: empty coefficient list")
            object.__setattr__(self, 'coefficients', coefficients)
        self._check_common()

    @property
    def period(self) -> float:
        return self.period_s

    def law(self) -> Tuple[float, ...]:
        if self.coefficients is not None:
            return self.coefficients
        return (self.f_start_hz, 0.0, self.f_end_hz - self.f_start_hz)

    def frequencies(self, t):
        u = np.asarray(t, dtype=float) / self.period_s
        return np.polynomial.polynomial.polyval(u, self.law())[np.newaxis, :]

    def phases(self, t):
        u = np.asarray(t, dtype=float) / self.period_s
        integral = np.polynomial.polynomial.polyint(self.law())
        return (2 * np.pi * self.period_s * np.polynomial.polynomial.polyval(u, integral))[np.newaxis, :]


def _piecewise_phase(t: np.ndarray, starts: np.ndarray, freqs: np.ndarray, period: float) -> Tuple[np.ndarray, np.ndarray]:
    """Phase-continuous piecewise-constant frequency law, right-continuous at boundaries"""
    ends = np.append(starts[1:], period)
    accumulated = np.concatenate([[0.0], np.cumsum(freqs * (ends - starts))[:-1]])
    idx = np.clip(np.searchsorted(starts, t, side='right') - 1, 0, len(starts) - 1)
    freq = freqs[idx]
    phase = 2 * np.pi * (accumulated[idx] + freq * (t - starts[idx]))
    return freq, phase


@dataclass(frozen=True)
class FrequencyHopping(SignalSpec):
    kind: ClassVar[SignalKind] = SignalKind.FREQUENCY_HOPPING
    hop_table: Tuple[Tuple[float, float], ...]
    period_s: float = DEFAULT_PERIOD_S

    def __post_init__(self):
        try:
            table = tuple((float(start), float(freq)) for start, freq in self.hop_table)
        except (TypeError, ValueError) as exc:
            raise InvalidSpec(f"frequency_hopping: malformed hop table ({exc})")
        object.__setattr__(self, 'hop_table', table)
        if not table:
            raise InvalidSpec("frequency_hopping: empty hop table")
        starts = np.array([s for s, _ in table])
        if starts[0] != 0.0:
            raise InvalidSpec("frequency_hopping: hop table must start at t = 0")
        if np.any(np.diff(starts) <= 0):
            raise InvalidSpec("frequency_hopping: hop starts must be strictly increasing")
        if starts[-1] >= self.period_s:
            raise InvalidSpec("frequency_hopping: last hop starts after the period")
        self._check_common()

    @property
    def period(self) -> float:
        return self.period_s

    def _table(self) -> Tuple[np.ndarray, np.ndarray]:
        return (np.array([s for s, _ in self.hop_table]),
                np.array([f for _, f in self.hop_table]))

    def frequencies(self, t):
        starts, freqs = self._table()
        freq, _ = _piecewise_phase(np.asarray(t, dtype=float), starts, freqs, self.period_s)
        return freq[np.newaxis, :]

    def phases(self, t):
        starts, freqs = self._table()
        _, phase = _piecewise_phase(np.asarray(t, dtype=float), starts, freqs, self.period_s)
        return phase[np.newaxis, :]


@dataclass(frozen=True)
class StepFrequency(SignalSpec):
    kind: ClassVar[SignalKind] = SignalKind.STEP_FREQUENCY
    f_start_hz: float
    f_step_hz: float
    dwell_s: float
    n_steps: int

    def __post_init__(self):
        if int(self.n_steps) < 1 or not self.dwell_s > 0:
            raise InvalidSpec("step_frequency: needs n_steps >= 1 and dwell_s > 0")
        object.__setattr__(self, 'n_steps', int(self.n_steps))
        self._check_common()

    @property
    def period(self) -> float:
        return self.dwell_s * self.n_steps

    def _table(self) -> Tuple[np.ndarray, np.ndarray]:
        index = np.arange(self.n_steps)
        return index * self.dwell_s, self.f_start_hz + index * self.f_step_hz

    def frequencies(self, t):
        starts, freqs = self._table()
        freq, _ = _piecewise_phase(self._snap(t), starts, freqs, self.period)
        return freq[np.newaxis, :]

    def phases(self, t):
        starts, freqs = self._table()
        t = np.asarray(t, dtype=float)
        snapped = self._snap(t)
        freq, phase = _piecewise_phase(snapped, starts, freqs, self.period)
        return (phase + 2 * np.pi * freq * (t - snapped))[np.newaxis, :]

    def _snap(self, t) -> np.ndarray:
        # sample times that land on a dwell boundary up to rounding belong to the new step
        t = np.asarray(t, dtype=float)
        return np.round(t / self.dwell_s, 9) * self.dwell_s


_SPEC_TYPES = {
    SignalKind.TONE: Tone,
    SignalKind.MULTI_TONE: MultiTone,
    SignalKind.LFM: Lfm,
    SignalKind.DUAL_CHIRP_LFM: DualChirpLfm,
    SignalKind.NLFM: Nlfm,
    SignalKind.FREQUENCY_HOPPING: FrequencyHopping,
    SignalKind.STEP_FREQUENCY: StepFrequency,
}


def signal_spec_from_dict(data: Dict[str, Any]) -> SignalSpec:
    """Build a SignalSpec from its config-file representation"""
    params = dict(data)
    try:
        kind = SignalKind(params.pop('kind'))
    except (KeyError, ValueError):
        raise InvalidSpec(f"unknown or missing signal kind in {data!r}")
    for key in ('f_list', 'coefficients', 'hop_table'):
        if params.get(key) is not None:
            params[key] = tuple(tuple(v) if isinstance(v, list) else v for v in params[key])
    try:
        return _SPEC_TYPES[kind](**params)
    except TypeError as exc:
        raise InvalidSpec(f"{kind.value}: {exc}")


# ============================================================================
# Operations
# ============================================================================

def period_sample_count(period_s: float, sample_rate_hz: float) -> int:
    """Samples in one period; raises InvalidSpec instead of truncating"""
    exact = period_s * sample_rate_hz
    count = int(round(exact))
    if count < 1 or abs(exact - count) > _SAMPLE_COUNT_RTOL * max(1.0, exact):
        raise InvalidSpec(
            f"period {period_s} s is not an integer number of samples at {sample_rate_hz} Hz"
        )
    return count


def synthesize(spec: SignalSpec, sample_rate_hz: float, n_periods: int = 1) -> SampledSignal:
    """
    Sample a SignalSpec.

    Args:
        spec: signal description
        sample_rate_hz: sample rate, must exceed twice the highest frequency
        n_periods: number of whole periods to generate

    Returns:
        Unit-amplitude SampledSignal exactly n_periods × period long
    """
    if int(n_periods) < 1:
        raise ConfigInvalid(f"n_periods must be a positive integer, got {n_periods}")
    f_max = spec.max_frequency_hz()
    if not sample_rate_hz > 2 * f_max:
        raise NyquistViolation(
            f"{spec.kind.value}: sample rate {sample_rate_hz:.4g} Hz <= 2 x {f_max:.4g} Hz"
        )
    n = period_sample_count(spec.period, sample_rate_hz)
    t = np.arange(n) / sample_rate_hz
    phases = spec.phases(t)
    if n > 1 and np.max(np.abs(np.diff(phases, axis=1))) >= np.pi:
        raise NyquistViolation(f"{spec.kind.value}: phase increment reaches pi between samples")
    one_period = np.cos(phases).sum(axis=0) / phases.shape[0]
    logger.debug("synthesized %s: %d samples/period x %d", spec.kind.value, n, n_periods)
    return SampledSignal(np.tile(one_period, int(n_periods)), sample_rate_hz, 0.0)


def instantaneous_frequency(spec: SignalSpec, t_s: float) -> FrozenSet[float]:
    """All frequency components active at time t_s, coincident components collapsed"""
    if not 0.0 <= t_s < spec.period:
        raise OutOfRange(f"t = {t_s} s outside [0, {spec.period})")
    values = spec.frequencies(np.array([float(t_s)]))[:, 0]
    return frozenset(float(f) for f in np.unique(np.round(values, 6)))


def sum_signals(a: SampledSignal, b: SampledSignal) -> SampledSignal:
    """Pointwise sum (the electrical coupler combining SUT and reference)"""
    if a.sample_rate_hz != b.sample_rate_hz or a.t0_s != b.t0_s:
        raise RateMismatch(
            f"time bases differ: {a.sample_rate_hz} Hz @ {a.t0_s} s vs "
            f"{b.sample_rate_hz} Hz @ {b.t0_s} s"
        )
    if a.n_samples != b.n_samples:
        raise LengthMismatch(f"lengths differ: {a.n_samples} vs {b.n_samples}")
    return a.with_samples(a.samples + b.samples)


def tile_periodic(signal: SampledSignal, repetitions: int) -> SampledSignal:
    if int(repetitions) < 1:
        raise ConfigInvalid(f"repetitions must be a positive integer, got {repetitions}")
    return signal.with_samples(np.tile(signal.samples, int(repetitions)))


def reference_tone(freq_hz: float, amplitude: float, n_samples: int,
                   sample_rate_hz: float) -> SampledSignal:
    t = np.arange(n_samples) / sample_rate_hz
    return SampledSignal(amplitude * np.cos(2 * np.pi * freq_hz * t), sample_rate_hz, 0.0)


# ============================================================================
# Presets
# ============================================================================

# hop order of the sample FH signal, as fractions of the band
_HOP_FRACTIONS = (0.15, 0.55, 0.35, 0.75, 0.05, 0.95, 0.25, 0.65)


class SignalFactory:
    """Factory for the SUT formats analyzed in the study"""

    @staticmethod
    def create_sample_signal(kind: str = "lfm", band_hz: Sequence[float] = (0.1e9, 4e9),
                             period_s: float = DEFAULT_PERIOD_S) -> SignalSpec:
        """Create a sample SUT spanning band_hz.

        Args:
            kind: one of lfm, nlfm, frequency_hopping, step_frequency,
                dual_chirp_lfm, two_tone
            band_hz: (low, high) edges of the band the signal occupies
            period_s: SUT period
        """
        low, high = float(band_hz[0]), float(band_hz[1])
        width = high - low
        n_hops = len(_HOP_FRACTIONS)

        if kind == "lfm":
            return Lfm(low, high, period_s)
        if kind == "nlfm":
            return Nlfm(low, high, period_s)
        if kind == "dual_chirp_lfm":
            return DualChirpLfm(low, high, period_s)
        if kind == "frequency_hopping":
            table = tuple((i * period_s / n_hops, low + frac * width)
                          for i, frac in enumerate(_HOP_FRACTIONS))
            return FrequencyHopping(table, period_s)
        if kind == "step_frequency":
            return StepFrequency(low + 0.1 * width, 0.1 * width, period_s / 8, 8)
        if kind == "two_tone":
            center = low + 0.75 * width
            return MultiTone((center, center + 25e6), period_s)
        raise InvalidSpec(f"unknown sample signal kind '{kind}'")
