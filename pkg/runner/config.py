"""
Scenario configuration - one JSON file per scenario.

    {
      "name": "step_interval_25mhz_lfm",
      "signal": {"kind": "lfm", "f_start_hz": 1e8, "f_end_hz": 4e9, "period_s": 2e-6},
      "sample_rate_hz": 1e10,
      "link": "time_division",
      "link_config": {"sbs_fwhm_hz": 2e7},
      "plan": {"f_step1_hz": 5e7, "delta_step_hz": 2.5e7, "step_period_s": 2e-6, "n_steps": 157},
      "outputs": ["spectrogram_csv", "heatmap_image", "metadata", "ridge_csv"],
      "assertions": {"ridge_coverage_min": 0.95}
    }

``signal`` may name a preset ({"preset": "nlfm", "band_hz": [...]}). A
time-division ``plan`` may be given by its band ({"band_hz": [...],
"delta_step_hz": ..., "step_period_s": ...}) or by a preset ("full_band", or
"resolution" with "delta_step_hz"); a parallel plan may be {"preset": "gallery"}.
"""
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union
import json
import logging

from analysis.oracle import StftParams
from models.errors import ConfigInvalid, SimulationError
from models.link_config import LinkConfig
from models.plans import BranchPlan, PlanBuilder, SfcwPlan
from models.waveforms import (
    DEFAULT_PERIOD_S, SignalFactory, SignalSpec, signal_spec_from_dict
)

logger = logging.getLogger(__name__)


class LinkKind(Enum):
    TIME_DIVISION = "time_division"
    PARALLEL = "parallel"


class OutputKind(Enum):
    SPECTROGRAM_CSV = "spectrogram_csv"
    HEATMAP_IMAGE = "heatmap_image"
    METADATA = "metadata"
    RIDGE_CSV = "ridge_csv"
    HEATMAP_HTML = "heatmap_html"
    STFT_CSV = "stft_csv"
    STFT_IMAGE = "stft_image"


DEFAULT_OUTPUT_NAMES = {
    OutputKind.SPECTROGRAM_CSV: "spectrogram.csv",
    OutputKind.HEATMAP_IMAGE: "heatmap.png",
    OutputKind.METADATA: "metadata.json",
    OutputKind.RIDGE_CSV: "ridge.csv",
    OutputKind.HEATMAP_HTML: "heatmap.html",
    OutputKind.STFT_CSV: "stft.csv",
    OutputKind.STFT_IMAGE: "stft.png",
}

ASSERTION_KEYS = {
    'ridge_coverage_min', 'ridge_tolerance_bins', 'ridge_rms_error_max_hz', 'resolvability',
    'stft_ridge_median_max_hz', 'cross_architecture', 'period_segments_min_correlation',
    'min_resolvable_separation_hz', 'search_grid_hz', 'f_a_hz'
}

_TOP_LEVEL_KEYS = {
    'name', 'signal', 'sample_rate_hz', 'link', 'link_config', 'plan', 'reference_freq_hz',
    'acquisition', 'outputs', 'oracle', 'assertions', 'n_jobs', 'description'
}

Plan = Union[SfcwPlan, BranchPlan]


@dataclass
class ScenarioConfig:
    """A fully parsed scenario; exactly one plan, matching the chosen link"""
    name: str
    signal: SignalSpec
    sample_rate_hz: float
    link: LinkKind
    plan: Plan
    link_config: LinkConfig = field(default_factory=LinkConfig)
    reference_freq_hz: Optional[float] = None
    n_scans: int = 1
    acquisition_offset_s: float = 0.0
    outputs: Dict[OutputKind, str] = field(default_factory=dict)
    oracle: Optional[StftParams] = None
    assertions: Dict[str, Any] = field(default_factory=dict)
    n_jobs: int = 1
    description: str = ''

    def __post_init__(self):
        if not self.name:
            raise ConfigInvalid("scenario name must be non-empty")
        if not self.sample_rate_hz > 0:
            raise ConfigInvalid(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        expected = SfcwPlan if self.link is LinkKind.TIME_DIVISION else BranchPlan
        if not isinstance(self.plan, expected):
            raise ConfigInvalid(f"{self.link.value} link needs a {expected.__name__}")
        if int(self.n_scans) < 1:
            raise ConfigInvalid(f"n_scans must be >= 1, got {self.n_scans}")
        for kind, name in self.outputs.items():
            if not name or not str(name).strip():
                raise ConfigInvalid(f"output path for {kind.value} is empty")
        unknown = sorted(set(self.assertions) - ASSERTION_KEYS)
        if unknown:
            raise ConfigInvalid(f"unknown assertion keys: {unknown}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'description': self.description,
            'signal': self.signal.to_dict(),
            'sample_rate_hz': self.sample_rate_hz,
            'link': self.link.value,
            'link_config': self.link_config.to_dict(),
            'plan': self.plan.to_dict(),
            'reference_freq_hz': self.reference_freq_hz,
            'acquisition': {'n_scans': self.n_scans, 'offset_s': self.acquisition_offset_s},
            'outputs': {kind.value: name for kind, name in self.outputs.items()},
            'oracle': self.oracle.to_dict() if self.oracle else None,
            'assertions': self.assertions,
            'n_jobs': self.n_jobs
        }


def _parse_signal(data: Dict[str, Any]) -> SignalSpec:
    data = dict(data)
    if 'preset' in data:
        preset = data.pop('preset')
        band = data.pop('band_hz', (0.1e9, 4e9))
        period = data.pop('period_s', DEFAULT_PERIOD_S)
        if data:
            raise ConfigInvalid(f"unknown signal preset keys: {sorted(data)}")
        return SignalFactory.create_sample_signal(preset, band, period)
    return signal_spec_from_dict(data)


def _parse_plan(data: Dict[str, Any], link: LinkKind, link_config: LinkConfig) -> Plan:
    data = dict(data)
    if link is LinkKind.PARALLEL:
        if data.get('preset') == 'gallery':
            return PlanBuilder.gallery_branches()
        return BranchPlan.from_dict(data)
    preset = data.pop('preset', None)
    if preset == 'full_band' and not data:
        return PlanBuilder.full_band_plan()
    if preset == 'resolution':
        try:
            return PlanBuilder.resolution_plan(data.pop('delta_step_hz'),
                                               data.pop('step_period_s', 2e-6))
        except KeyError as exc:
            raise ConfigInvalid(f"resolution plan needs {exc}")
    if preset is not None:
        raise ConfigInvalid(f"unknown plan preset {preset!r} or extra keys {sorted(data)}")
    if 'band_hz' in data:
        low, high = data.pop('band_hz')
        try:
            return PlanBuilder.band_plan(low, high, data.pop('delta_step_hz'),
                                         data.pop('step_period_s'), link_config)
        except KeyError as exc:
            raise ConfigInvalid(f"band plan needs {exc}")
    return SfcwPlan.from_dict(data)


def _parse_outputs(raw: Any) -> Dict[OutputKind, str]:
    if raw is None:
        raw = [kind.value for kind in (OutputKind.SPECTROGRAM_CSV, OutputKind.HEATMAP_IMAGE,
                                       OutputKind.METADATA, OutputKind.RIDGE_CSV)]
    if isinstance(raw, list):
        raw = {name: None for name in raw}
    if not isinstance(raw, dict):
        raise ConfigInvalid(f"outputs must be a list of kinds or a kind -> file mapping, got {raw!r}")
    outputs = {}
    for key, name in raw.items():
        try:
            kind = OutputKind(key)
        except ValueError:
            raise ConfigInvalid(f"unknown output kind '{key}'")
        outputs[kind] = DEFAULT_OUTPUT_NAMES[kind] if name is None else str(name)
    return outputs


def _check_assertion_shapes(assertions: Dict[str, Any]):
    rule = assertions.get('resolvability')
    if rule is not None and not (isinstance(rule, dict) and {'f_a_hz', 'f_b_hz'} <= set(rule)):
        raise ConfigInvalid("resolvability needs f_a_hz and f_b_hz")
    rule = assertions.get('cross_architecture')
    if rule is not None and not isinstance(rule, dict):
        raise ConfigInvalid("cross_architecture must be a mapping of bounds")
    bounds = assertions.get('min_resolvable_separation_hz')
    if bounds is not None and not (isinstance(bounds, (list, tuple)) and len(bounds) == 2):
        raise ConfigInvalid("min_resolvable_separation_hz must be a [low, high] pair")


def scenario_from_dict(data: Dict[str, Any]) -> ScenarioConfig:
    """Parse the JSON representation of a scenario.

    Missing, mistyped or malformed fields surface as ConfigInvalid.
    """
    try:
        return _parse_scenario(data)
    except SimulationError:
        raise
    except (TypeError, ValueError, KeyError, AttributeError) as exc:
        raise ConfigInvalid(f"malformed scenario: {type(exc).__name__}: {exc}") from exc


def _parse_scenario(data: Dict[str, Any]) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigInvalid("a scenario must be a JSON object")
    unknown = sorted(set(data) - _TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigInvalid(f"unknown scenario keys: {unknown}")
    for key in ('name', 'signal', 'sample_rate_hz', 'link', 'plan'):
        if key not in data:
            raise ConfigInvalid(f"scenario is missing '{key}'")
    try:
        link = LinkKind(data['link'])
    except ValueError:
        raise ConfigInvalid(f"link must be 'time_division' or 'parallel', got {data['link']!r}")

    link_config = LinkConfig.from_dict(data.get('link_config'))
    acquisition = dict(data.get('acquisition') or {})
    n_scans = int(acquisition.pop('n_scans', 1))
    offset_s = float(acquisition.pop('offset_s', 0.0))
    if acquisition:
        raise ConfigInvalid(f"unknown acquisition keys: {sorted(acquisition)}")
    oracle = data.get('oracle')
    assertions = dict(data.get('assertions') or {})
    _check_assertion_shapes(assertions)
    return ScenarioConfig(
        name=str(data['name']),
        description=str(data.get('description', '')),
        signal=_parse_signal(data['signal']),
        sample_rate_hz=float(data['sample_rate_hz']),
        link=link,
        plan=_parse_plan(data['plan'], link, link_config),
        link_config=link_config,
        reference_freq_hz=None if data.get('reference_freq_hz') is None else float(data['reference_freq_hz']),
        n_scans=n_scans,
        acquisition_offset_s=offset_s,
        outputs=_parse_outputs(data.get('outputs')),
        oracle=StftParams.from_dict(oracle) if oracle is not None else None,
        assertions=assertions,
        n_jobs=int(data.get('n_jobs', 1))
    )


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path, encoding='utf-8') as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read scenario {path}: {exc}")
    logger.debug("loaded scenario %s from %s", data.get('name') if isinstance(data, dict) else '?', path)
    return scenario_from_dict(data)
