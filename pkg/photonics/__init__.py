from .link import ComplexEnvelope, modulate_cs_dsb, shift_cs_ssb, apply_sbs, photodetect
from .time_division import RawTrace, validate_plan, measured_frequency, run_time_division
from .parallel import branch_frequency, run_parallel
