from hpnet.training.loop import train, validation_metrics
from hpnet.training.losses import (
    EmptyBatchError,
    LossBreakdown,
    classification_loss,
    huber,
    select_mode_joint,
    select_mode_marginal,
    total_loss,
)
from hpnet.training.optim import AdamW, CosineSchedule, TrainingError

__all__ = [
    "AdamW",
    "CosineSchedule",
    "EmptyBatchError",
    "LossBreakdown",
    "TrainingError",
    "classification_loss",
    "huber",
    "select_mode_joint",
    "select_mode_marginal",
    "total_loss",
    "train",
    "validation_metrics",
]
