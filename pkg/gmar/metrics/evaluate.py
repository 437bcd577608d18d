"""
Method Evaluation - the four confidence metrics over a dataset

Per image: explain, score the soft-masked image (o_c) against the full
image (y_c), then trace the insertion and deletion curves. The target is
always the model's prediction on the clean image.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gmar.attribution.explain import Method, explain
from gmar.attribution.rollout import RolloutConfig
from gmar.errors import ParameterError
from gmar.logging import get_logger
from gmar.metrics.perturbation import (
    PerturbationConfig,
    deletion_curve,
    explanation_confidence,
    insertion_curve,
)
from gmar.metrics.scores import average_drop, average_increase
from gmar.model.trace import class_probability
from gmar.model.vit import ModelParams, image_pixels

log = get_logger(__name__)


@dataclass
class ImageResult:
    index: int
    target_class: int
    base_confidence: float
    explanation_confidence: float
    insertion: List[List[float]]
    deletion: List[List[float]]
    insertion_auc: float
    deletion_auc: float


@dataclass
class MetricReport:
    """avg_drop / avg_increase in percent, AUCs are dataset means in [0, 1]."""

    method: str
    avg_drop: float
    avg_increase: float
    insertion_auc: float
    deletion_auc: float
    num_images: int
    config: Dict = field(default_factory=dict)
    images: List[ImageResult] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "config": self.config,
            "num_images": self.num_images,
            "avg_drop": self.avg_drop,
            "avg_increase": self.avg_increase,
            "insertion_auc": self.insertion_auc,
            "deletion_auc": self.deletion_auc,
            "insertion_curves": [r.insertion for r in self.images],
            "deletion_curves": [r.deletion for r in self.images],
            "per_image": [
                {
                    "index": r.index,
                    "target_class": r.target_class,
                    "y_c": r.base_confidence,
                    "o_c": r.explanation_confidence,
                    "insertion_auc": r.insertion_auc,
                    "deletion_auc": r.deletion_auc,
                }
                for r in self.images
            ],
        }

    def summary(self) -> dict:
        return {
            "method": self.method,
            "avg_drop": self.avg_drop,
            "avg_increase": self.avg_increase,
            "insertion_auc": self.insertion_auc,
            "deletion_auc": self.deletion_auc,
            "num_images": self.num_images,
        }


def _evaluate_image(params: ModelParams, index: int, image, method: Method,
                    rollout_config: RolloutConfig, perturbation: PerturbationConfig,
                    seed: int) -> ImageResult:
    pixels = image_pixels(image)
    explanation = explain(params, pixels, method, rollout_config, seed=seed + index)
    target = explanation.predicted_class
    saliency = explanation.saliency

    y_c = class_probability(params, pixels, target)
    o_c = explanation_confidence(params, pixels, saliency, target)
    ins = insertion_curve(params, pixels, saliency, perturbation, target)
    dele = deletion_curve(params, pixels, saliency, perturbation, target)
    return ImageResult(index, target, y_c, o_c, ins.points(), dele.points(), ins.auc, dele.auc)


def _images_of(dataset: Sequence) -> List:
    """Accept (image, label) pairs or bare images."""
    images = []
    for item in dataset:
        if isinstance(item, tuple):
            item = item[0]
        images.append(item)
    return images


def evaluate_method(params: ModelParams, dataset: Sequence, method,
                    rollout_config: Optional[RolloutConfig] = None,
                    perturbation: Optional[PerturbationConfig] = None,
                    seed: int = 0, workers: int = 1) -> MetricReport:
    """
    Run one method over a dataset and aggregate the four metrics.

    The random baseline draws image i's map from seed + i. `workers` > 1
    evaluates images on a thread pool; results are gathered in dataset
    order, so the report is identical for any worker count.
    """
    method = Method.parse(method)
    rollout_config = rollout_config or RolloutConfig()
    perturbation = perturbation or PerturbationConfig()
    images = _images_of(dataset)
    if not images:
        raise ParameterError("cannot evaluate on an empty dataset")
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    perturbation.resolved_steps(params.config.num_patches)

    def run(index_image: Tuple[int, object]) -> ImageResult:
        index, image = index_image
        return _evaluate_image(params, index, image, method, rollout_config, perturbation, seed)

    log.info(f"Evaluating {method.cli_name} on {len(images)} images ({workers} worker(s))")
    if workers == 1:
        results = [run(item) for item in enumerate(images)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, enumerate(images)))

    base = [r.base_confidence for r in results]
    explained = [r.explanation_confidence for r in results]
    report = MetricReport(
        method=method.cli_name,
        avg_drop=average_drop(base, explained),
        avg_increase=average_increase(base, explained),
        insertion_auc=float(np.mean([r.insertion_auc for r in results])),
        deletion_auc=float(np.mean([r.deletion_auc for r in results])),
        num_images=len(results),
        config={
            "rollout": rollout_config.to_dict(),
            "perturbation": perturbation.to_dict(),
            "seed": seed,
        },
        images=results,
    )
    log.info(
        f"[OK] {report.method}: drop {report.avg_drop:.2f}  increase {report.avg_increase:.2f}  "
        f"insertion {report.insertion_auc:.4f}  deletion {report.deletion_auc:.4f}"
    )
    return report


def compare_methods(params: ModelParams, dataset: Sequence, methods: Sequence,
                    rollout_config: Optional[RolloutConfig] = None,
                    perturbation: Optional[PerturbationConfig] = None,
                    seed: int = 0, workers: int = 1) -> Tuple[Dict[str, MetricReport], pd.DataFrame]:
    """Evaluate several methods on one dataset; returns reports and a summary table."""
    reports = {}
    for method in methods:
        report = evaluate_method(params, dataset, method, rollout_config, perturbation, seed, workers)
        reports[report.method] = report
    table = pd.DataFrame([r.summary() for r in reports.values()]).set_index("method")
    return reports, table
