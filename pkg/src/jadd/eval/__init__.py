"""Metrics, bound checks and the scenario harness."""

from .metrics import (NMSE_FLOOR_DB, BoundCheck, BoundTerms, FeedbackOverhead, check_error_bounds,
                      feedback_overhead, mean_nmse_db, nmse_db, nmse_linear, spectral_efficiency,
                      noise_floor_db)
from .runner import DropResult, RunReport, ScenarioSpec, run_drop, run_scenario

__all__ = [
    "NMSE_FLOOR_DB", "BoundCheck", "BoundTerms", "FeedbackOverhead", "check_error_bounds",
    "feedback_overhead", "mean_nmse_db", "nmse_db", "nmse_linear", "spectral_efficiency",
    "noise_floor_db", "DropResult", "RunReport", "ScenarioSpec", "run_drop", "run_scenario",
]
