from hpnet.evaluation.assignment import MatchResult, min_cost_assignment
from hpnet.evaluation.metrics import (
    MISS_THRESHOLD,
    b_min_fde,
    min_ade,
    min_fde,
    min_joint_ade,
    min_joint_fde,
    miss_rate,
)
from hpnet.evaluation.report import EvalReport
from hpnet.evaluation.rollout import cv_predictor, model_predictor, rollout_eval
from hpnet.evaluation.stability import overlap_cost_matrix, stability_summed_ade

__all__ = [
    "MISS_THRESHOLD",
    "EvalReport",
    "MatchResult",
    "b_min_fde",
    "cv_predictor",
    "min_ade",
    "min_cost_assignment",
    "min_fde",
    "min_joint_ade",
    "min_joint_fde",
    "miss_rate",
    "model_predictor",
    "overlap_cost_matrix",
    "rollout_eval",
    "stability_summed_ade",
]
