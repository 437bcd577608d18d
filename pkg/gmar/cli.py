"""
GMAR command line - train, explain, evaluate, compare

    python -m gmar train-toy --out model.gmarw --seed 42
    python -m gmar explain --weights model.gmarw --image cat.ppm --method gmar-l2 --out cat
    python -m gmar evaluate --weights model.gmarw --dataset synthetic:42:200 --method gmar-l1 --out r.json
    python -m gmar compare --weights model.gmarw --image cat.ppm --methods rollout,gmar-l1 --out cmp

Exit codes: 0 success, 2 usage or parameter error, 3 data or format
error. stdout carries machine-readable output only; messages go to stderr.
"""
import argparse
import json
import os
from pathlib import Path
from typing import Optional, Sequence

from gmar import __version__
from gmar.attribution import Method, RolloutConfig, WeightScope, difference_map, explain
from gmar.config import EXIT_OK, EXIT_USAGE, ROLLOUT_DEFAULTS, SYNTHETIC_PROFILE, TOY_TRAIN_PROFILE, \
    TOY_VIT_PROFILE
from gmar.data import (
    RenderMode,
    SyntheticDatasetSpec,
    generate_synthetic,
    load_image_ppm,
    load_weights,
    mirror_label_map,
    render_heatmap,
    save_image_ppm,
    save_weights,
    synthetic_from_flag,
)
from gmar.errors import GMARError, ParameterError, exit_code_for
from gmar.logging import configure, get_logger
from gmar.logging.history import history_path_for, read_history, write_history
from gmar.logging.reports import summary_header, summary_row, write_json, write_report
from gmar.metrics import PerturbationConfig, evaluate_method
from gmar.model import ViTConfig
from gmar.training import TrainConfig, train

log = get_logger(__name__)


def _writable_target(path: Path) -> Path:
    """Fail fast (exit 2) when an output cannot be created."""
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise ParameterError(f"output directory {parent} does not exist")
    if not os.access(parent, os.W_OK):
        raise ParameterError(f"output directory {parent} is not writable")
    if path.is_dir():
        raise ParameterError(f"output path {path} is a directory")
    return path


def _prefixed(prefix: str, suffix: str) -> Path:
    return _writable_target(Path(f"{prefix}{suffix}"))


def _emit(document: dict):
    print(json.dumps(document, sort_keys=True))


def _rollout_config(args) -> RolloutConfig:
    return RolloutConfig(
        alpha=args.alpha,
        weight_scope=WeightScope.parse(args.scope),
        row_normalize=not args.no_row_normalize,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_train_toy(args) -> int:
    out = _writable_target(Path(args.out))
    history_out = _writable_target(history_path_for(out))
    if args.samples < 1:
        raise ParameterError(f"--samples must be >= 1, got {args.samples}")

    vit_config = ViTConfig.from_profile(TOY_VIT_PROFILE)
    train_config = TrainConfig.from_profile(
        TOY_TRAIN_PROFILE,
        epochs=args.epochs,
        seed=args.seed,
        augment=not args.no_augment,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        warmup_steps=args.warmup_steps,
        lr_schedule=args.lr_schedule,
    )
    dataset = generate_synthetic(SyntheticDatasetSpec(
        num_classes=vit_config.num_classes,
        samples_per_class=args.samples,
        image_size=vit_config.image_size,
        seed=args.seed,
    ))

    result = train(vit_config, train_config, dataset, label_flip=mirror_label_map(vit_config.num_classes))
    save_weights(result.params, out, vit_config)
    stored, _ = load_weights(out)
    history = read_history(write_history(result.history, history_out))
    log.info(f"[OK] weights -> {out}, history -> {history_out}")
    _emit({
        "weights": str(out),
        "history": str(history_out),
        "initial_loss": result.initial_loss,
        "final_loss": history[-1]["loss"],
        "final_accuracy": history[-1]["accuracy"],
        "checksum": stored.checksum(),
    })
    return EXIT_OK


def cmd_explain(args) -> int:
    method = Method.parse(args.method)
    map_out = _prefixed(args.out, ".map.ppm")
    overlay_out = _prefixed(args.out, ".overlay.ppm")
    json_out = _prefixed(args.out, ".json")

    params, _ = load_weights(args.weights)
    image = load_image_ppm(args.image)
    explanation = explain(params, image, method, _rollout_config(args), seed=args.seed)

    save_image_ppm(render_heatmap(explanation.saliency, image, RenderMode.RAW), map_out)
    save_image_ppm(render_heatmap(explanation.saliency, image, RenderMode.OVERLAY), overlay_out)
    document = explanation.to_dict()
    document["rollout_config"] = _rollout_config(args).to_dict()
    document["seed"] = args.seed
    write_json(document, json_out)
    log.info(f"[OK] {method.cli_name}: class {explanation.predicted_class} -> {args.out}.*")
    _emit({"map": str(map_out), "overlay": str(overlay_out), "json": str(json_out),
           "predicted_class": explanation.predicted_class})
    return EXIT_OK


def cmd_evaluate(args) -> int:
    method = Method.parse(args.method)
    out = _writable_target(Path(args.out))
    params, config = load_weights(args.weights)
    dataset = synthetic_from_flag(args.dataset, config.image_size, config.num_classes)
    perturbation = PerturbationConfig(
        steps=args.steps,
        insertion_baseline=args.insertion_baseline,
        deletion_baseline=args.deletion_baseline,
    )
    report = evaluate_method(params, dataset, method, _rollout_config(args), perturbation,
                             seed=args.seed, workers=args.workers)
    report.config["dataset"] = args.dataset
    write_report(report, out)
    log.info(f"[OK] report -> {out}")
    print(summary_header())
    print(summary_row(report))
    return EXIT_OK


def cmd_compare(args) -> int:
    names = [m for m in args.methods.split(",") if m.strip()]
    if len(names) != 2:
        raise ParameterError(f"--methods needs exactly two methods, got {len(names)}")
    methods = [Method.parse(m) for m in names]
    tags = [m.cli_name for m in methods]
    if tags[0] == tags[1]:
        tags = [f"{tags[0]}.a", f"{tags[1]}.b"]

    outputs = {}
    for tag in tags:
        outputs[tag] = (_prefixed(args.out, f".{tag}.map.ppm"), _prefixed(args.out, f".{tag}.overlay.ppm"))
    diff_out = _prefixed(args.out, ".diff.ppm")
    json_out = _prefixed(args.out, ".json")

    params, _ = load_weights(args.weights)
    image = load_image_ppm(args.image)
    rollout_config = _rollout_config(args)
    explanations = [explain(params, image, m, rollout_config, seed=args.seed) for m in methods]

    for tag, explanation in zip(tags, explanations):
        map_out, overlay_out = outputs[tag]
        save_image_ppm(render_heatmap(explanation.saliency, image, RenderMode.RAW), map_out)
        save_image_ppm(render_heatmap(explanation.saliency, image, RenderMode.OVERLAY), overlay_out)
    diff = difference_map(explanations[0].saliency, explanations[1].saliency)
    save_image_ppm(render_heatmap(diff, image, RenderMode.DIVERGING), diff_out)

    write_json({
        "methods": tags,
        "explanations": {tag: e.to_dict() for tag, e in zip(tags, explanations)},
        "difference": diff.tolist(),
        "max_abs_difference": float(abs(diff).max()),
        "rollout_config": rollout_config.to_dict(),
        "seed": args.seed,
    }, json_out)
    log.info(f"[OK] compared {tags[0]} vs {tags[1]} -> {args.out}.*")
    _emit({"diff": str(diff_out), "json": str(json_out),
           "max_abs_difference": float(abs(diff).max())})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--seed", type=int, default=0, help="seed for every random draw (default 0)")
    sub.add_argument("-v", "--verbose", action="count", default=0, help="progress on stderr (-vv debug)")


def _add_rollout(sub):
    sub.add_argument("--alpha", type=float, default=ROLLOUT_DEFAULTS["alpha"], help="residual ratio")
    sub.add_argument("--scope", default="per-layer", help="head-weight scope: per-layer or global")
    sub.add_argument("--no-row-normalize", action="store_true", help="skip per-step row normalization")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmar", description="Gradient-weighted attention rollout for ViTs")
    parser.add_argument("--version", action="version", version=f"gmar {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    train_p = subs.add_parser("train-toy", help="train the toy ViT on synthetic quadrants")
    train_p.add_argument("--out", default="weights.gmarw", help="weight file to write")
    train_p.add_argument("--epochs", type=int, default=TOY_TRAIN_PROFILE["epochs"])
    train_p.add_argument("--samples", type=int, default=SYNTHETIC_PROFILE["samples_per_class"],
                         help="images per class")
    train_p.add_argument("--learning-rate", type=float, default=TOY_TRAIN_PROFILE["learning_rate"])
    train_p.add_argument("--batch-size", type=int, default=TOY_TRAIN_PROFILE["batch_size"])
    train_p.add_argument("--warmup-steps", type=int, default=TOY_TRAIN_PROFILE["warmup_steps"])
    train_p.add_argument("--lr-schedule", default=TOY_TRAIN_PROFILE["lr_schedule"], help="constant or cosine")
    train_p.add_argument("--no-augment", action="store_true", help="disable flip and crop")
    _add_common(train_p)
    train_p.set_defaults(handler=cmd_train_toy)

    explain_p = subs.add_parser("explain", help="saliency map for one image")
    explain_p.add_argument("--weights", required=True)
    explain_p.add_argument("--image", required=True, help="binary PPM (P6)")
    explain_p.add_argument("--method", default="gmar-l2", help="rollout, gmar-l1, gmar-l2, gradcam, random")
    explain_p.add_argument("--out", required=True, help="output prefix")
    _add_rollout(explain_p)
    _add_common(explain_p)
    explain_p.set_defaults(handler=cmd_explain)

    eval_p = subs.add_parser("evaluate", help="four-metric evaluation over a synthetic dataset")
    eval_p.add_argument("--weights", required=True)
    eval_p.add_argument("--dataset", default="synthetic:0:200", help="synthetic:SEED:N")
    eval_p.add_argument("--method", required=True)
    eval_p.add_argument("--steps", type=int, default=None, help="perturbation steps (default one patch each)")
    eval_p.add_argument("--insertion-baseline", default="blur", help="blur or gray")
    eval_p.add_argument("--deletion-baseline", default="zero", help="zero or gray")
    eval_p.add_argument("--workers", type=int, default=1)
    eval_p.add_argument("--out", required=True, help="report JSON path")
    _add_rollout(eval_p)
    _add_common(eval_p)
    eval_p.set_defaults(handler=cmd_evaluate)

    compare_p = subs.add_parser("compare", help="two methods side by side plus their difference")
    compare_p.add_argument("--weights", required=True)
    compare_p.add_argument("--image", required=True)
    compare_p.add_argument("--methods", required=True, help="A,B")
    compare_p.add_argument("--out", required=True, help="output prefix")
    _add_rollout(compare_p)
    _add_common(compare_p)
    compare_p.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (None, 0) else EXIT_USAGE
    configure(args.verbose)
    try:
        return args.handler(args)
    except (GMARError, OSError) as exc:
        code = exit_code_for(exc)
        log.error(f"{args.command}: {exc}")
        return code
