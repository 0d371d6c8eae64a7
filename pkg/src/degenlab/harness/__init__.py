from .config import (ExperimentKind, Scenario, SolverSettings, dump_scenario, load_scenario,
                     scenario_from_dict, scenario_to_dict)
from .experiments import THRESHOLDS, run_experiment
from .report import Report, ReportVerdict, Row, Threshold, report_csv, write_report

serialize = dump_scenario

__all__ = [
    "ExperimentKind", "Scenario", "SolverSettings", "dump_scenario", "load_scenario",
    "scenario_from_dict", "scenario_to_dict", "THRESHOLDS", "run_experiment", "Report",
    "ReportVerdict", "Row", "Threshold", "report_csv", "write_report", "serialize",
]
