"""
Spectrogram Model - time x frequency intensity matrix with explicit axes.
"""
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Union
import logging

import numpy as np
import pandas as pd

from models.errors import ConfigInvalid, LengthMismatch

logger = logging.getLogger(__name__)

# 10 significant digits keeps the CSV stable across platforms
CSV_FLOAT_FORMAT = "%.9e"


class Normalization(Enum):
    NONE = "none"
    GLOBAL_MAX = "global_max"


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Intensity matrix [n_freq rows x n_time cols].

    ``latency_s`` is the known delay between an event in the SUT and its
    appearance on the time axis (zero for the STFT oracle).
    """
    intensity: np.ndarray
    freq_axis_hz: np.ndarray
    time_axis_s: np.ndarray
    normalization: Normalization = Normalization.NONE
    latency_s: float = 0.0

    def __post_init__(self):
        intensity = np.asarray(self.intensity, dtype=float)
        freq = np.asarray(self.freq_axis_hz, dtype=float)
        time = np.asarray(self.time_axis_s, dtype=float)
        if intensity.ndim != 2 or intensity.shape != (freq.size, time.size):
            raise LengthMismatch(
                f"matrix shape {intensity.shape} does not match axes ({freq.size}, {time.size})"
            )
        if freq.size > 1 and np.any(np.diff(freq) <= 0):
            raise ConfigInvalid("frequency axis must be strictly increasing")
        if time.size > 1 and np.any(np.diff(time) <= 0):
            raise ConfigInvalid("time axis must be strictly increasing")
        if np.any(intensity < 0):
            raise ConfigInvalid("spectrogram intensities must be non-negative")
        object.__setattr__(self, 'intensity', intensity)
        object.__setattr__(self, 'freq_axis_hz', freq)
        object.__setattr__(self, 'time_axis_s', time)

    @property
    def shape(self):
        return self.intensity.shape

    @property
    def bin_spacing_hz(self) -> float:
        if self.freq_axis_hz.size < 2:
            return 0.0
        return float(np.median(np.diff(self.freq_axis_hz)))

    def normalized(self) -> "Spectrogram":
        """Scale to unit global maximum; an all-zero matrix is returned unnormalized"""
        peak = float(self.intensity.max()) if self.intensity.size else 0.0
        if peak <= 0:
            logger.warning("all-zero spectrogram, normalization skipped")
            return replace(self, normalization=Normalization.NONE)
        return replace(self, intensity=self.intensity / peak, normalization=Normalization.GLOBAL_MAX)

    def without_rows(self, mask: np.ndarray) -> "Spectrogram":
        """Drop the rows where mask is True"""
        keep = ~np.asarray(mask, dtype=bool)
        return replace(self, intensity=self.intensity[keep], freq_axis_hz=self.freq_axis_hz[keep])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.intensity,
            index=[CSV_FLOAT_FORMAT % f for f in self.freq_axis_hz],
            columns=[CSV_FLOAT_FORMAT % t for t in self.time_axis_s]
        )

    def write_csv(self, path: Union[str, Path]) -> Path:
        """First row = time axis (s), first column = frequency axis (Hz), corner empty"""
        path = Path(path)
        self.to_frame().to_csv(path, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        return path

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "Spectrogram":
        frame = pd.read_csv(path, index_col=0)
        return cls(
            intensity=frame.to_numpy(dtype=float),
            freq_axis_hz=frame.index.to_numpy(dtype=float),
            time_axis_s=np.array([float(c) for c in frame.columns]),
            normalization=Normalization.NONE
        )

    def summary(self) -> Dict:
        return {
            'nFreq': int(self.shape[0]),
            'nTime': int(self.shape[1]),
            'freqRangeHz': [float(self.freq_axis_hz[0]), float(self.freq_axis_hz[-1])] if self.shape[0] else [],
            'timeRangeS': [float(self.time_axis_s[0]), float(self.time_axis_s[-1])] if self.shape[1] else [],
            'normalization': self.normalization.value,
            'latencyS': self.latency_s
        }


@dataclass(frozen=True)
class PulseDetection:
    """A detected pulse in a detector trace"""
    center_index: int
    width_samples: int
    height: float

    def __post_init__(self):
        if self.width_samples < 1 or not self.height > 0:
            raise ConfigInvalid("a pulse needs width >= 1 sample and positive height")

    @property
    def start_index(self) -> int:
        return self.center_index - self.width_samples // 2
