"""
Link configuration - physical constants of the optical chain and the SBS gain
profile they imply.
"""
from dataclasses import dataclass, asdict, fields, replace
from typing import Any, Dict, Optional

from models.errors import ConfigInvalid


@dataclass(frozen=True)
class SbsGainProfile:
    """Lorentzian SBS gain: center offset from f_c, FWHM bandwidth and peak power gain"""
    center_offset_hz: float
    fwhm_hz: float = 20e6
    peak_gain_db: float = 20.0

    def __post_init__(self):
        if not self.fwhm_hz > 0:
            raise ConfigInvalid(f"SBS gain bandwidth must be positive, got {self.fwhm_hz}")
        if not self.peak_gain_db > 0:
            raise ConfigInvalid(f"SBS peak gain must be positive, got {self.peak_gain_db}")

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class LinkConfig:
    """Settings shared by every step / branch of a link.

    ``detector_lpf_hz`` and ``output_rate_hz`` default to 4 x the SBS gain
    bandwidth and 4 x the detector cutoff respectively.
    """
    f_sbs_hz: float = 10.8e9
    f_pump_offset_hz: float = 10.85e9
    modulation_index: float = 0.1
    detector_lpf_hz: Optional[float] = None
    noise_rms: float = 0.0
    rng_seed: int = 0
    sbs_fwhm_hz: float = 20e6
    sbs_peak_gain_db: float = 20.0
    branch_jitter_hz: float = 0.0
    output_rate_hz: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.modulation_index <= 1.0:
            raise ConfigInvalid(f"modulation_index must lie in (0, 1], got {self.modulation_index}")
        if self.noise_rms < 0 or self.branch_jitter_hz < 0:
            raise ConfigInvalid("noise_rms and branch_jitter_hz must be non-negative")
        if self.detector_lpf_hz is not None and not self.detector_lpf_hz > 0:
            raise ConfigInvalid(f"detector_lpf_hz must be positive, got {self.detector_lpf_hz}")
        if self.output_rate_hz is not None and not self.output_rate_hz > 0:
            raise ConfigInvalid(f"output_rate_hz must be positive, got {self.output_rate_hz}")
        # gain profile validates bandwidth and gain
        self.gain_profile()

    @property
    def gain_center_hz(self) -> float:
        return self.f_pump_offset_hz - self.f_sbs_hz

    @property
    def lpf_hz(self) -> float:
        if self.detector_lpf_hz is not None:
            return float(self.detector_lpf_hz)
        return 4.0 * self.sbs_fwhm_hz

    @property
    def output_rate(self) -> float:
        if self.output_rate_hz is not None:
            return float(self.output_rate_hz)
        return 4.0 * self.lpf_hz

    def gain_profile(self) -> SbsGainProfile:
        return SbsGainProfile(self.gain_center_hz, self.sbs_fwhm_hz, self.sbs_peak_gain_db)

    def with_seed(self, seed: Optional[int]) -> "LinkConfig":
        if seed is None:
            return self
        return replace(self, rng_seed=int(seed))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['detector_lpf_hz'] = self.lpf_hz
        data['output_rate_hz'] = self.output_rate
        data['gain_center_hz'] = self.gain_center_hz
        return data

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "LinkConfig":
        data = dict(data or {})
        data.pop('gain_center_hz', None)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigInvalid(f"unknown link_config keys: {unknown}")
        return cls(**data)
