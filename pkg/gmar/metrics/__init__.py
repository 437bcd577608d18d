from gmar.metrics.evaluate import ImageResult, MetricReport, compare_methods, evaluate_method
from gmar.metrics.perturbation import (
    BaselineKind,
    PerturbationConfig,
    PerturbationCurve,
    build_baseline,
    deletion_curve,
    explanation_confidence,
    insertion_curve,
    masked_image,
    reveal_order,
    step_counts,
)
from gmar.metrics.scores import average_drop, average_increase, curve_auc, per_image_drop

__all__ = [
    "BaselineKind",
    "ImageResult",
    "MetricReport",
    "PerturbationConfig",
    "PerturbationCurve",
    "average_drop",
    "average_increase",
    "build_baseline",
    "compare_methods",
    "curve_auc",
    "deletion_curve",
    "evaluate_method",
    "explanation_confidence",
    "insertion_curve",
    "masked_image",
    "per_image_drop",
    "reveal_order",
    "step_counts",
]
