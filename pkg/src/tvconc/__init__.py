"""Concordance indices for time-varying risk scores in survival analysis."""

from .concordance import (ConcordanceReport, NoComparablePairs, TieAlgebraReport, concordance,
                          concordance_fast, concordance_over_time, concordance_pairwise,
                          tie_algebra_report)
from .dataset import (CONTINUOUS, DISCRETE, DataError, SurvivalDataset, SurvivalRecord, load_csv,
                      save_csv)
from .hazard import LOWER, UPPER, GroupHazardSpec, HazardSegment, PiecewiseHazard
from .kaplan_meier import kaplan_meier, km_model, smooth_survival
from .ranking import DiscreteHazardModel, TrainConfig, train
from .risk import (RiskScore, analytic_model, antolini_score, discrete_group_model,
                   fixed_time_survival_score, hazard_score, linear_predictor_score, parse_selector,
                   quantile_time_score)
from .simulate import CensoringSpec, ScenarioSpec, builtin_scenario, generate

__version__ = "0.1.0"

__all__ = [
    "CONTINUOUS",
    "CensoringSpec",
    "ConcordanceReport",
    "DISCRETE",
    "DataError",
    "DiscreteHazardModel",
    "GroupHazardSpec",
    "HazardSegment",
    "LOWER",
    "NoComparablePairs",
    "PiecewiseHazard",
    "RiskScore",
    "ScenarioSpec",
    "SurvivalDataset",
    "SurvivalRecord",
    "TieAlgebraReport",
    "TrainConfig",
    "UPPER",
    "analytic_model",
    "antolini_score",
    "builtin_scenario",
    "concordance",
    "concordance_fast",
    "concordance_over_time",
    "concordance_pairwise",
    "discrete_group_model",
    "fixed_time_survival_score",
    "generate",
    "hazard_score",
    "kaplan_meier",
    "km_model",
    "linear_predictor_score",
    "load_csv",
    "parse_selector",
    "quantile_time_score",
    "save_csv",
    "smooth_survival",
    "tie_algebra_report",
    "train",
]
