"""
Accuracy metrics, power model, parameter studies and the solve engine
"""
from app.analysis.metrics import error_metrics, nearest_rank, slope_permutation_test
from app.analysis.power import PowerReport, power_analytic, power_measured, power_from_result
from app.analysis.studies import StudyKind, StudySpec, StudyResult, StudyError, run_study
from app.analysis.engine import SolveEngine, qualified_error
from app.analysis.acceptance import run_acceptance_suite

__all__ = [
    "error_metrics",
    "nearest_rank",
    "slope_permutation_test",
    "PowerReport",
    "power_analytic",
    "power_measured",
    "power_from_result",
    "StudyKind",
    "StudySpec",
    "StudyResult",
    "StudyError",
    "run_study",
    "SolveEngine",
    "qualified_error",
    "run_acceptance_suite",
]
