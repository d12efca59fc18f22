from .waveforms import SampledSignal, SignalSpec, SignalFactory, synthesize, instantaneous_frequency
from .link_config import LinkConfig, SbsGainProfile
from .plans import SfcwPlan, BranchPlan, PlanBuilder, ShiftDirection
from .spectrogram import Spectrogram, Normalization, PulseDetection
from .errors import SimulationError, ConfigInvalid
