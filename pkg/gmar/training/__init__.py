from gmar.training.optim import AdamState, adam_step, clip_by_global_norm, cross_entropy, global_norm, \
    scheduled_learning_rate
from gmar.training.trainer import TrainConfig, TrainingResult, accuracy, augment_batch, train

__all__ = [
    "AdamState",
    "TrainConfig",
    "TrainingResult",
    "accuracy",
    "adam_step",
    "augment_batch",
    "clip_by_global_norm",
    "cross_entropy",
    "global_norm",
    "scheduled_learning_rate",
    "train",
]
