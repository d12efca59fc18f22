"""
Error taxonomy for the SBS time-frequency analysis simulator.

Every error carries a machine-readable category and the process exit code
the CLI reports for it. The category is the class name, except that the
refinements of ConfigInvalid report as ConfigInvalid and keep their class
name in errorClass. Exit codes:

    2  configuration errors
    3  physics / plan errors
    4  scenario assertion failures
"""
from typing import Dict, Optional


CONFIG_EXIT_CODE = 2
PHYSICS_EXIT_CODE = 3
ASSERTION_EXIT_CODE = 4


class SimulationError(Exception):
    """Base class for all simulator errors"""
    exit_code: int = PHYSICS_EXIT_CODE
    # category reported for this class and its subclasses; None means the class name
    reported_category: Optional[str] = None

    @property
    def category(self) -> str:
        return self.reported_category or type(self).__name__

    def to_dict(self) -> Dict:
        return {
            'category': self.category,
            'errorClass': type(self).__name__,
            'message': str(self),
            'exitCode': self.exit_code
        }


# ============================================================================
# Configuration errors
# ============================================================================

class ConfigInvalid(SimulationError):
    exit_code = CONFIG_EXIT_CODE
    reported_category = "ConfigInvalid"


class InvalidSpec(ConfigInvalid):
    """Malformed signal description (hop tables, periods, coefficients)"""


class InvalidPlan(ConfigInvalid):
    """Degenerate SFCW or branch plan"""


# ============================================================================
# Physics / plan errors
# ============================================================================

class NyquistViolation(SimulationError):
    pass


class PeriodMismatch(SimulationError):
    """Step period is not an integer multiple of the SUT period"""


class PlanNotValidated(SimulationError):
    pass


class IndexOutOfRange(SimulationError):
    pass


class OutOfRange(SimulationError):
    pass


class RateMismatch(SimulationError):
    pass


class LengthMismatch(SimulationError):
    pass


class NoReferenceFound(SimulationError):
    pass


class InsufficientData(SimulationError):
    pass


class LengthIndivisible(SimulationError):
    pass


class SignalTooShort(SimulationError):
    pass


class FrequencyOutOfAxis(SimulationError):
    pass


class EmptyOverlap(SimulationError):
    pass


class NoneResolved(SimulationError):
    pass


# ============================================================================
# Assertions
# ============================================================================

class AssertionFailed(SimulationError):
    exit_code = ASSERTION_EXIT_CODE
