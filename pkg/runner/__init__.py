from .config import LinkKind, OutputKind, ScenarioConfig, load_scenario, scenario_from_dict
from .scenario import ScenarioResult, SuiteReport, run_scenario, run_suite
