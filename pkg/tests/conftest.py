"""
Shared small-scale fixtures.

Test runs use 2 GS/s and SUTs below 0.6 GHz so that every link simulation
finishes in well under a second; the physics (20 MHz gain bandwidth, 20 dB
peak gain, 50 MHz gain center) is the production default.
"""
import os
import sys

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

import pytest

from analysis.reconstruction import extract_frame, find_reference_pulse, segment_and_stack
from models.link_config import LinkConfig
from models.plans import PlanBuilder
from models.waveforms import Lfm, synthesize
from photonics.time_division import run_time_division, validate_plan

FS = 2e9
PERIOD = 2e-6
GAMMA = 20e6


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs the bundled full-scale scenarios")


@pytest.fixture
def config():
    return LinkConfig()


def band_plan(low=0.1e9, high=0.6e9, step=25e6, step_period=PERIOD, link_config=None):
    return PlanBuilder.band_plan(low, high, step, step_period, link_config or LinkConfig())


def time_division_spectrogram(spec, plan, link_config=None, reference=None, **kwargs):
    """Run the time-division link and the reconstruction chain; returns (spectrogram, trace, frame)"""
    link_config = link_config or LinkConfig()
    validate_plan(plan, spec.period)
    sut = synthesize(spec, FS)
    reference = plan.f_step1_hz + link_config.gain_center_hz if reference is None else reference
    trace = run_time_division(sut, reference, plan, link_config, **kwargs)
    frame = extract_frame(trace, find_reference_pulse(trace))
    spectrogram = segment_and_stack(frame, plan, link_config, baseline=trace.baseline,
                                    reference_freq_hz=reference, latency_s=trace.latency_s)
    return spectrogram, trace, frame


@pytest.fixture(scope="session")
def lfm_spec():
    return Lfm(0.2e9, 0.6e9, PERIOD)


@pytest.fixture(scope="session")
def lfm_run(lfm_spec):
    """LFM 0.2-0.6 GHz analysed over 0.1-0.6 GHz in 25 MHz steps"""
    return time_division_spectrogram(lfm_spec, band_plan())
