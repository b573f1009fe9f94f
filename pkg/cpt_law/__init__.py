"""Continual pre-training loss law: schedule areas, fitting, prediction and hyper-parameter search."""

__version__ = "0.2.0"

from .areas import AreaTrace, compute_areas, split_areas
from .fit import Dataset, FitConfig, FitResult, Run, fit, huber_objective
from .law import EvalContext, LawParams, LossSeries, eval_loss, predict_curve
from .schedules import PhaseSpec, Schedule, build_schedule, concat_pt_cpt

__all__ = [
    "AreaTrace",
    "Dataset",
    "EvalContext",
    "FitConfig",
    "FitResult",
    "LawParams",
    "LossSeries",
    "PhaseSpec",
    "Run",
    "Schedule",
    "build_schedule",
    "compute_areas",
    "concat_pt_cpt",
    "eval_loss",
    "fit",
    "huber_objective",
    "predict_curve",
    "split_areas",
]
