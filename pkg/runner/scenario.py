"""
Scenario runner - executes one scenario end to end (link, reconstruction,
oracle comparisons, embedded assertions) and writes its artifacts; a suite
runs every scenario of a directory and aggregates a report.
"""
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import json
import logging
import math

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from analysis.oracle import (
    StftParams, compare_ridges, min_resolvable_separation, resample_ridge, ridge_coverage,
    ridge_rms_error_hz, ridge_truth_errors, stft, two_tone_resolvability
)
from analysis.reconstruction import (
    extract_frame, find_reference_pulse, period_segment_correlation, pulse_fwhm_s, ridge,
    segment_and_stack
)
from models.errors import ConfigInvalid, EmptyOverlap, NoneResolved, SimulationError
from models.link_config import LinkConfig
from models.plans import PlanBuilder
from models.spectrogram import Spectrogram
from models.waveforms import synthesize
from photonics.parallel import branch_frequencies, run_parallel
from photonics.time_division import measured_frequencies, run_time_division, validate_plan
from runner.config import LinkKind, OutputKind, ScenarioConfig, load_scenario
from visualization.heatmap import write_heatmap_html, write_heatmap_png, write_ridge_csv

logger = logging.getLogger(__name__)

SUITE_REPORT_CSV = "suite_report.csv"
SUITE_REPORT_JSON = "suite_report.json"

# rows this many detector cutoffs from the reference carry its beat with the SUT
CROSS_ARCHITECTURE_REFERENCE_GUARD = 2.0

# columns this many detector periods (1 / cutoff) from a SUT period boundary may show either side of it
TRUTH_WRAP_DETECTOR_PERIODS = 3.0


@dataclass(frozen=True)
class AssertionOutcome:
    name: str
    passed: bool
    value: Any
    bound: Any

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'passed': self.passed,
                'value': _jsonable(self.value), 'bound': _jsonable(self.bound)}


@dataclass
class ScenarioResult:
    """Outcome of one scenario: metrics, assertion outcomes, artifacts or the error that stopped it"""
    name: str
    metrics: Dict[str, Any] = field(default_factory=dict)
    assertions: List[AssertionOutcome] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)
    error: Optional[SimulationError] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(a.passed for a in self.assertions)

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return self.error.exit_code
        return 0 if self.passed else 4

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'passed': self.passed,
            'exitCode': self.exit_code,
            'metrics': _jsonable(self.metrics),
            'assertions': [a.to_dict() for a in self.assertions],
            'artifacts': self.artifacts,
            'error': self.error.to_dict() if self.error else None
        }


@dataclass
class SuiteReport:
    results: List[ScenarioResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def exit_code(self) -> int:
        """Exit code of the first failing scenario in name order"""
        for result in self.results:
            if not result.passed:
                return result.exit_code
        return 0

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for result in self.results:
            rows.append({
                'scenario': result.name,
                'passed': result.passed,
                'exit_code': result.exit_code,
                'category': result.error.category if result.error else '',
                'failed_assertions': ';'.join(a.name for a in result.assertions if not a.passed),
                'ridge_coverage': result.metrics.get('ridgeCoverage'),
                'ridge_rms_error_hz': result.metrics.get('ridgeRmsErrorHz'),
                'pulse_fwhm_s': result.metrics.get('pulseFwhmS'),
            })
        return pd.DataFrame(rows, columns=['scenario', 'passed', 'exit_code', 'category',
                                           'failed_assertions', 'ridge_coverage',
                                           'ridge_rms_error_hz', 'pulse_fwhm_s'])


def _jsonable(value: Any) -> Any:
    """Plain JSON types; NaN and infinities become null"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def _write_json(data: Dict[str, Any], path: Path) -> Path:
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        json.dump(_jsonable(data), handle, indent=2, sort_keys=True)
        handle.write('\n')
    return path


def _safe(metric, *args, **kwargs) -> Optional[float]:
    try:
        return metric(*args, **kwargs)
    except EmptyOverlap:
        return None


# ============================================================================
# Link execution
# ============================================================================

@dataclass
class _LinkRun:
    spectrogram: Spectrogram
    frequencies_hz: np.ndarray
    frame: Any = None
    baseline: Any = None
    plan: Any = None
    reference_hz: Optional[float] = None


def _run_link(config: ScenarioConfig, link_config: LinkConfig, sut) -> _LinkRun:
    sweep_rate = config.signal.sweep_rate_hz_per_s()
    if config.link is LinkKind.PARALLEL:
        spec = run_parallel(sut, config.plan, link_config, n_jobs=config.n_jobs,
                            sweep_rate_hz_per_s=sweep_rate).normalized()
        return _LinkRun(spec, branch_frequencies(config.plan))

    plan = replace(config.plan)
    validate_plan(plan, config.signal.period)
    freqs = measured_frequencies(plan, link_config)
    reference = float(freqs[0]) if config.reference_freq_hz is None else float(config.reference_freq_hz)
    trace = run_time_division(sut, reference, plan, link_config, n_scans=config.n_scans,
                              acquisition_offset_s=config.acquisition_offset_s, n_jobs=config.n_jobs,
                              sweep_rate_hz_per_s=sweep_rate)
    frame = extract_frame(trace, find_reference_pulse(trace))
    spec = segment_and_stack(frame, plan, link_config, baseline=trace.baseline,
                             reference_freq_hz=reference, latency_s=trace.latency_s)
    return _LinkRun(spec, freqs, frame, trace.baseline, plan, reference)


def _stft_ridge_on(spec: Spectrogram, oracle: Spectrogram) -> np.ndarray:
    """SBS ridge sampled at the STFT frame times (shifted by the link latency)"""
    axis = spec.time_axis_s
    span = axis[-1] + (axis[1] - axis[0] if axis.size > 1 else 0.0)
    target = np.mod(oracle.time_axis_s + spec.latency_s, span) if span > 0 else oracle.time_axis_s
    return resample_ridge(ridge(spec), axis, target)


def _cross_architecture(config: ScenarioConfig, link_config: LinkConfig, run: _LinkRun) -> Dict[str, float]:
    """Parallel link on the time-division grid, compared over the shared rows.

    Rows close enough to the reference for its beat with the SUT to pass the
    detector exist only in the time-division record and are left out.
    """
    m = run.plan.period_multiple_m or 1
    sut = synthesize(config.signal, config.sample_rate_hz, n_periods=m)
    parallel = run_parallel(sut, PlanBuilder.matching_branches(run.plan, link_config), link_config,
                            n_jobs=config.n_jobs, sweep_rate_hz_per_s=config.signal.sweep_rate_hz_per_s())
    keep = np.isin(np.round(parallel.freq_axis_hz), np.round(run.spectrogram.freq_axis_hz))
    parallel = parallel.without_rows(~keep).normalized()
    if parallel.shape != run.spectrogram.shape:
        raise ConfigInvalid(f"grids differ: parallel {parallel.shape}, time-division {run.spectrogram.shape}")

    guard = CROSS_ARCHITECTURE_REFERENCE_GUARD * link_config.lpf_hz
    far = np.abs(run.spectrogram.freq_axis_hz - run.reference_hz) > guard
    if not far.any():
        raise EmptyOverlap("every shared row lies within the reference guard band")
    # both sides rescaled over the compared rows
    serial = run.spectrogram.without_rows(~far).normalized().intensity
    branches = parallel.without_rows(~far).normalized().intensity
    return {
        'linf': float(np.max(np.abs(branches - serial))),
        'ridgeMedianErrHz': compare_ridges(ridge(run.spectrogram), ridge(parallel)).median_abs_err_hz,
        'rowsCompared': int(far.sum())
    }


# ============================================================================
# Assertions
# ============================================================================

def _check_assertions(config: ScenarioConfig, link_config: LinkConfig, run: _LinkRun,
                      metrics: Dict[str, Any], oracle: Optional[Spectrogram]) -> List[AssertionOutcome]:
    rules = config.assertions
    spec = run.spectrogram
    outcomes = []

    def at_most(name, value, bound):
        outcomes.append(AssertionOutcome(name, value is not None and value <= bound, value, bound))

    def at_least(name, value, bound):
        outcomes.append(AssertionOutcome(name, value is not None and value >= bound, value, bound))

    if 'ridge_coverage_min' in rules:
        at_least('ridge_coverage_min', metrics['ridgeCoverage'], rules['ridge_coverage_min'])
    if 'ridge_rms_error_max_hz' in rules:
        at_most('ridge_rms_error_max_hz', metrics['ridgeRmsErrorHz'], rules['ridge_rms_error_max_hz'])

    if 'resolvability' in rules:
        rule = rules['resolvability']
        result = two_tone_resolvability(spec, rule['f_a_hz'], rule['f_b_hz'])
        metrics['resolvability'] = result.to_dict()
        expected = bool(rule.get('expect_resolved', True))
        outcomes.append(AssertionOutcome('resolvability', result.resolved == expected,
                                         result.valley_ratio, {'expectResolved': expected}))

    if 'stft_ridge_median_max_hz' in rules:
        if oracle is None:
            raise ConfigInvalid("stft_ridge_median_max_hz needs an oracle section")
        at_most('stft_ridge_median_max_hz', metrics['stftRidgeMedianErrHz'], rules['stft_ridge_median_max_hz'])

    if 'cross_architecture' in rules:
        if config.link is not LinkKind.TIME_DIVISION:
            raise ConfigInvalid("cross_architecture applies to time-division scenarios")
        rule = rules['cross_architecture']
        cross = _cross_architecture(config, link_config, run)
        metrics['crossArchitecture'] = cross
        if 'linf_max' in rule:
            at_most('cross_architecture.linf_max', cross['linf'], rule['linf_max'])
        if 'ridge_median_max_hz' in rule:
            at_most('cross_architecture.ridge_median_max_hz', cross['ridgeMedianErrHz'],
                    rule['ridge_median_max_hz'])

    if 'period_segments_min_correlation' in rules:
        if config.link is not LinkKind.TIME_DIVISION:
            raise ConfigInvalid("period_segments_min_correlation applies to time-division scenarios")
        value = period_segment_correlation(run.frame, run.plan, run.baseline)
        metrics['periodSegmentCorrelation'] = value
        at_least('period_segments_min_correlation', value, rules['period_segments_min_correlation'])

    if 'min_resolvable_separation_hz' in rules:
        if config.link is not LinkKind.TIME_DIVISION:
            raise ConfigInvalid("min_resolvable_separation_hz applies to time-division scenarios")
        lo, hi = rules['min_resolvable_separation_hz']
        try:
            value = min_resolvable_separation(
                link_config, replace(config.plan, period_multiple_m=None),
                search_grid_hz=rules.get('search_grid_hz'), f_a_hz=rules.get('f_a_hz'),
                sample_rate_hz=config.sample_rate_hz, n_jobs=config.n_jobs
            )
        except NoneResolved:
            value = None
        metrics['minResolvableSeparationHz'] = value
        outcomes.append(AssertionOutcome('min_resolvable_separation_hz',
                                         value is not None and lo <= value <= hi, value, [lo, hi]))
    return outcomes


# ============================================================================
# Scenario / suite
# ============================================================================

def run_scenario(config: ScenarioConfig, out_dir: Union[str, Path], seed: Optional[int] = None) -> ScenarioResult:
    """
    Run one scenario and write its artifacts.

    Args:
        config: parsed scenario
        out_dir: directory receiving the artifacts (created if missing)
        seed: overrides link_config.rng_seed

    Returns:
        ScenarioResult; simulation errors propagate to the caller
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    link_config = config.link_config.with_seed(seed)
    logger.info("scenario %s: %s link, seed %d", config.name, config.link.value, link_config.rng_seed)

    sut = synthesize(config.signal, config.sample_rate_hz)
    run = _run_link(config, link_config, sut)
    spec = run.spectrogram

    estimate = ridge(spec)
    wrap_window = TRUTH_WRAP_DETECTOR_PERIODS / link_config.lpf_hz
    metrics: Dict[str, Any] = {
        'ridgeCoverage': _safe(ridge_coverage, spec, config.signal,
                               int(config.assertions.get('ridge_tolerance_bins', 1)),
                               wrap_window_s=wrap_window),
        'ridgeRmsErrorHz': _safe(ridge_rms_error_hz, spec, config.signal, wrap_window_s=wrap_window),
        'pulseFwhmS': pulse_fwhm_s(spec),
        'latencyS': spec.latency_s,
    }

    oracle = None
    stft_params = None
    if config.oracle is not None or OutputKind.STFT_CSV in config.outputs \
            or OutputKind.STFT_IMAGE in config.outputs:
        stft_params = config.oracle or StftParams()
        oracle = stft(sut, stft_params)
        comparison = _safe(compare_ridges, _stft_ridge_on(spec, oracle), ridge(oracle))
        metrics['stftRidgeMedianErrHz'] = comparison.median_abs_err_hz if comparison else None

    outcomes = _check_assertions(config, link_config, run, metrics, oracle)
    result = ScenarioResult(config.name, metrics, outcomes)

    writers = {
        OutputKind.SPECTROGRAM_CSV: lambda path: spec.write_csv(path),
        OutputKind.HEATMAP_IMAGE: lambda path: write_heatmap_png(spec, path),
        OutputKind.HEATMAP_HTML: lambda path: write_heatmap_html(spec, path, title=config.name),
        OutputKind.RIDGE_CSV: lambda path: write_ridge_csv(
            spec.time_axis_s, estimate, path,
            ridge_truth_errors(estimate, spec.time_axis_s, config.signal, spec.latency_s, wrap_window)),
        OutputKind.STFT_CSV: lambda path: oracle.write_csv(path),
        OutputKind.STFT_IMAGE: lambda path: write_heatmap_png(oracle, path),
    }
    for kind, name in sorted(config.outputs.items(), key=lambda item: item[0].value):
        if kind is OutputKind.METADATA:
            continue
        writers[kind](out_dir / name)
        result.artifacts.append(name)

    if OutputKind.METADATA in config.outputs:
        name = config.outputs[OutputKind.METADATA]
        result.artifacts.append(name)
        metadata = {
            'scenario': config.to_dict(),
            'seed': link_config.rng_seed,
            'frequenciesHz': run.frequencies_hz,
            'periodMultiple': run.plan.period_multiple_m if run.plan is not None else None,
            'referenceFreqHz': run.reference_hz,
            'sweepRateHzPerS': config.signal.sweep_rate_hz_per_s(),
            'stftParams': stft_params.to_dict() if stft_params is not None else None,
            'spectrogram': spec.summary(),
            'stft': oracle.summary() if oracle is not None else None,
            'result': result.to_dict()
        }
        _write_json(metadata, out_dir / name)

    level = logging.INFO if result.passed else logging.WARNING
    logger.log(level, "scenario %s %s", config.name, "passed" if result.passed else "failed")
    return result


def _run_file(path: Path, out_dir: Path, seed: Optional[int]) -> ScenarioResult:
    try:
        config = load_scenario(path)
    except SimulationError as exc:
        logger.error("scenario file %s: %s", path.name, exc)
        return ScenarioResult(path.stem, error=exc)
    try:
        return run_scenario(config, out_dir / config.name, seed)
    except SimulationError as exc:
        logger.error("scenario %s: %s: %s", config.name, exc.category, exc)
        return ScenarioResult(config.name, error=exc)


def run_suite(directory: Union[str, Path], out_dir: Union[str, Path], seed: Optional[int] = None,
              n_jobs: int = 1) -> SuiteReport:
    """Run every *.json scenario of a directory and write suite_report.csv/json"""
    directory = Path(directory)
    paths = sorted(directory.glob('*.json')) if directory.is_dir() else []
    if not paths:
        raise ConfigInvalid(f"no scenario files in {directory}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info("suite %s: %d scenario(s), %d job(s)", directory, len(paths), n_jobs)

    results = Parallel(n_jobs=n_jobs)(delayed(_run_file)(path, out_dir, seed) for path in paths)
    report = SuiteReport(sorted(results, key=lambda r: r.name))
    report.to_frame().to_csv(out_dir / SUITE_REPORT_CSV, index=False, float_format="%.9e",
                             lineterminator="\n")
    _write_json({'passed': report.passed, 'exitCode': report.exit_code,
                 'scenarios': [r.to_dict() for r in report.results]}, out_dir / SUITE_REPORT_JSON)
    logger.info("suite finished: %d/%d passed",
                sum(r.passed for r in report.results), len(report.results))
    return report
