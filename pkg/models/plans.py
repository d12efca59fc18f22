"""
Scan Plans - SFCW step plans for the time-division link and branch plans for
the parallel link, with builders for the plans used in the study.
"""
from dataclasses import dataclass, asdict, fields
from typing import Any, Dict, Optional
from enum import Enum

from models.errors import ConfigInvalid, IndexOutOfRange, InvalidPlan
from models.link_config import LinkConfig


class ShiftDirection(Enum):
    UP = "up"
    DOWN = "down"

    @property
    def sign(self) -> int:
        return 1 if self is ShiftDirection.UP else -1


@dataclass
class SfcwPlan:
    """Step-frequency carrier scan.

    ``period_multiple_m`` stays None until validate_plan has matched the step
    period against the SUT period.
    """
    f_step1_hz: float
    delta_step_hz: float
    step_period_s: float
    n_steps: int
    period_multiple_m: Optional[int] = None

    def __post_init__(self):
        if not self.delta_step_hz > 0:
            raise InvalidPlan(f"step interval must be positive, got {self.delta_step_hz}")
        if int(self.n_steps) < 1 or int(self.n_steps) != self.n_steps:
            raise InvalidPlan(f"n_steps must be a positive integer, got {self.n_steps}")
        if not self.step_period_s > 0:
            raise InvalidPlan(f"step period must be positive, got {self.step_period_s}")
        if self.period_multiple_m is not None and int(self.period_multiple_m) < 1:
            raise InvalidPlan(f"period multiple must be >= 1, got {self.period_multiple_m}")
        self.n_steps = int(self.n_steps)

    @property
    def scan_duration_s(self) -> float:
        return self.n_steps * self.step_period_s

    @property
    def validated(self) -> bool:
        return self.period_multiple_m is not None

    def step_frequency(self, n: int) -> float:
        """Carrier shift f_step_n of the 1-based step n"""
        if not 1 <= n <= self.n_steps:
            raise IndexOutOfRange(f"step {n} outside 1..{self.n_steps}")
        return self.f_step1_hz + (n - 1) * self.delta_step_hz

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SfcwPlan":
        return cls(**_known_keys(cls, data, "plan"))


@dataclass(frozen=True)
class BranchPlan:
    """Parallel-link branch grid: branch k measures f_base ± k·Δf"""
    f_base_hz: float
    delta_f_hz: float
    n_branches: int
    direction: ShiftDirection = ShiftDirection.UP

    def __post_init__(self):
        if not self.delta_f_hz > 0:
            raise InvalidPlan(f"branch spacing must be positive, got {self.delta_f_hz}")
        if int(self.n_branches) < 1 or int(self.n_branches) != self.n_branches:
            raise InvalidPlan(f"n_branches must be a positive integer, got {self.n_branches}")
        if not isinstance(self.direction, ShiftDirection):
            try:
                object.__setattr__(self, 'direction', ShiftDirection(self.direction))
            except ValueError:
                raise InvalidPlan(f"direction must be 'up' or 'down', got {self.direction!r}")
        object.__setattr__(self, 'n_branches', int(self.n_branches))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['direction'] = self.direction.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BranchPlan":
        return cls(**_known_keys(cls, data, "plan"))


def _known_keys(cls, data: Dict[str, Any], label: str) -> Dict[str, Any]:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigInvalid(f"unknown {label} keys for {cls.__name__}: {unknown}")
    return dict(data)


class PlanBuilder:
    """Builder for the SFCW and branch plans used in the study"""

    @staticmethod
    def band_plan(f_low_hz: float, f_high_hz: float, delta_step_hz: float,
                  step_period_s: float, config: LinkConfig) -> SfcwPlan:
        """SFCW plan whose measured frequencies run from f_low_hz to f_high_hz"""
        if f_high_hz < f_low_hz:
            raise InvalidPlan("band upper edge below lower edge")
        n_steps = int(round((f_high_hz - f_low_hz) / delta_step_hz)) + 1
        return SfcwPlan(
            f_step1_hz=f_low_hz - config.gain_center_hz,
            delta_step_hz=delta_step_hz,
            step_period_s=step_period_s,
            n_steps=n_steps
        )

    @staticmethod
    def full_band_plan() -> SfcwPlan:
        """50 MHz start, 5 MHz steps, 781 steps of 2 μs: 0.1-4 GHz with the default pump"""
        return SfcwPlan(f_step1_hz=50e6, delta_step_hz=5e6, step_period_s=2e-6, n_steps=781)

    @staticmethod
    def resolution_plan(delta_step_hz: float, step_period_s: float = 2e-6) -> SfcwPlan:
        """SFCW from 50 MHz to 3.95 GHz at the given step interval"""
        n_steps = int(round((3.95e9 - 50e6) / delta_step_hz)) + 1
        return SfcwPlan(f_step1_hz=50e6, delta_step_hz=delta_step_hz,
                        step_period_s=step_period_s, n_steps=n_steps)

    @staticmethod
    def gallery_branches() -> BranchPlan:
        """Twenty branches spaced 500 MHz from 0.5 GHz up to 10 GHz"""
        return BranchPlan(f_base_hz=0.5e9, delta_f_hz=500e6, n_branches=20)

    @staticmethod
    def matching_branches(plan: SfcwPlan, config: LinkConfig) -> BranchPlan:
        """Branch grid reproducing the measured frequencies of an SFCW plan"""
        return BranchPlan(
            f_base_hz=plan.f_step1_hz + config.gain_center_hz,
            delta_f_hz=plan.delta_step_hz,
            n_branches=plan.n_steps
        )
