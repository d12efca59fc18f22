"""
SBS FTTM Simulator - time-frequency analysis of periodic microwave signals by
stimulated-Brillouin-scattering frequency-to-time mapping.
Command-line application

    python app.py simulate --config scenarios/band_0p1_4ghz_lfm.json --seed 1 --out out
    python app.py suite --config scenarios --out out
    python app.py oracle --config scenarios/format_nlfm.json
    python app.py compare out/a/spectrogram.csv out/b/spectrogram.csv

Exit codes: 0 success, 2 configuration error, 3 physics/plan error,
4 scenario assertion failure.
"""
from pathlib import Path
from typing import List, Optional
import argparse
import json
import logging
import os
import sys

from dotenv import load_dotenv

from analysis.oracle import StftParams, compare_ridges, resample_ridge, stft
from analysis.reconstruction import ridge
from models.errors import AssertionFailed, ConfigInvalid, SimulationError
from models.spectrogram import Spectrogram
from models.waveforms import synthesize
from runner.config import load_scenario
from runner.scenario import run_scenario, run_suite
from visualization.heatmap import write_heatmap_png

logger = logging.getLogger('sbs_fttm')

ERROR_FILE = 'error.json'


def _env_int(name: str) -> Optional[int]:
    value = os.environ.get(name)
    if value in (None, ''):
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigInvalid(f"{name} must be an integer, got {value!r}")


def _emit(data: dict) -> None:
    print(json.dumps(data, sort_keys=True))


# ============================================================================
# Commands
# ============================================================================

def cmd_simulate(args) -> int:
    config = load_scenario(args.config)
    if args.jobs is not None:
        config.n_jobs = args.jobs
    result = run_scenario(config, Path(args.out), args.seed)
    _emit({'scenario': result.name, 'passed': result.passed, 'artifacts': result.artifacts})
    if not result.passed:
        failed = [a.name for a in result.assertions if not a.passed]
        raise AssertionFailed(f"scenario {result.name}: failed assertions {failed}")
    return 0


def cmd_suite(args) -> int:
    report = run_suite(args.config, Path(args.out), args.seed, n_jobs=args.jobs or 1)
    _emit({'passed': report.passed, 'scenarios': len(report.results),
           'failed': [r.name for r in report.results if not r.passed]})
    if not report.passed:
        first = next(r for r in report.results if not r.passed)
        if first.error is not None:
            raise first.error
        raise AssertionFailed(f"suite: scenario {first.name} failed its assertions")
    return 0


def cmd_oracle(args) -> int:
    """STFT of the scenario's SUT only, no link simulation"""
    config = load_scenario(args.config)
    params = config.oracle or StftParams()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = stft(synthesize(config.signal, config.sample_rate_hz), params)
    spec.write_csv(out / 'stft.csv')
    write_heatmap_png(spec, out / 'stft.png')
    _emit({'scenario': config.name, 'stft': spec.summary(), 'params': params.to_dict()})
    return 0


def cmd_compare(args) -> int:
    """Ridge statistics of two spectrogram CSV files (second resampled onto the first's time axis)"""
    first, second = (Spectrogram.read_csv(path) for path in args.spectrograms)
    other = resample_ridge(ridge(second), second.time_axis_s, first.time_axis_s)
    comparison = compare_ridges(ridge(first), other)
    _emit(comparison.to_dict())
    return 0


COMMANDS = {
    'simulate': cmd_simulate,
    'suite': cmd_suite,
    'oracle': cmd_oracle,
    'compare': cmd_compare,
}


# ============================================================================
# Argument parsing
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='sbs-fttm', description=__doc__.split('\n')[1])
    parser.add_argument('--log-level', default=os.environ.get('SBS_FTTM_LOG_LEVEL', 'INFO'))
    verbs = parser.add_subparsers(dest='command', required=True)

    def common(sub, config_help):
        sub.add_argument('--config', required=True, help=config_help)
        sub.add_argument('--out', default=os.environ.get('SBS_FTTM_OUT_DIR', 'out'))
        sub.add_argument('--seed', type=int, default=None, help='overrides link_config.rng_seed')
        sub.add_argument('--jobs', type=int, default=_env_int('SBS_FTTM_N_JOBS'))

    common(verbs.add_parser('simulate', help='run one scenario'), 'scenario JSON file')
    common(verbs.add_parser('suite', help='run every scenario of a directory'), 'scenario directory')
    common(verbs.add_parser('oracle', help='STFT of a scenario SUT'), 'scenario JSON file')
    compare = verbs.add_parser('compare', help='ridge statistics of two spectrogram CSV files')
    compare.add_argument('spectrograms', nargs=2)
    compare.add_argument('--out', default=os.environ.get('SBS_FTTM_OUT_DIR', 'out'))
    return parser


# ============================================================================
# Error Handlers
# ============================================================================

def report_error(exc: SimulationError, out_dir: Optional[str]) -> int:
    """One-line JSON record on stderr, mirrored to error.json in the output directory"""
    record = {'category': exc.category, 'errorClass': type(exc).__name__, 'message': str(exc)}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    if out_dir:
        try:
            path = Path(out_dir)
            path.mkdir(parents=True, exist_ok=True)
            (path / ERROR_FILE).write_text(json.dumps(record, sort_keys=True) + '\n', encoding='utf-8')
        except OSError as io_error:
            logger.warning("could not write %s: %s", ERROR_FILE, io_error)
    return exc.exit_code


# ============================================================================
# Main
# ============================================================================

def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
    except ConfigInvalid as exc:
        return report_error(exc, None)
    logging.basicConfig(level=str(args.log_level).upper(),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return COMMANDS[args.command](args)
    except SimulationError as exc:
        return report_error(exc, getattr(args, 'out', None))


if __name__ == '__main__':
    sys.exit(main())
