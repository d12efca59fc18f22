from .reconstruction import find_reference_pulse, extract_frame, segment_and_stack, reconstruct, ridge
from .oracle import StftParams, stft, two_tone_resolvability, compare_ridges, min_resolvable_separation
