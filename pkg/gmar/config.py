"""
Configuration management for GMAR

Every tunable lives here as a named profile. Nothing is read from the
environment: runs are reproduced from their flags alone.
"""

# Toy model (desk scale)
TOY_VIT_PROFILE = {
    "image_size": 32,
    "patch_size": 8,
    "embed_dim": 64,
    "num_layers": 4,
    "num_heads": 4,
    "mlp_dim": 128,
    "num_classes": 4,
}

# ViT-Large-Patch16-224 on Tiny-ImageNet, kept for reference only
REFERENCE_VIT_PROFILE = {
    "image_size": 224,
    "patch_size": 16,
    "embed_dim": 1024,
    "num_layers": 24,
    "num_heads": 16,
    "mlp_dim": 4096,
    "num_classes": 200,
}

INIT_STD = 0.02
LAYERNORM_EPS = 1e-6

# Full-scale fine-tuning recipe
REFERENCE_TRAIN_RECIPE = {
    "learning_rate": 5e-5,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "batch_size": 32,
    "epochs": 100,
    "augment": True,
}

# From-scratch toy training; same optimizer constants, larger peak step with
# linear warmup and cosine decay over 30 epochs x 50 batches
TOY_TRAIN_PROFILE = {
    "learning_rate": 3e-3,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "batch_size": 16,
    "epochs": 30,
    "augment": True,
    "crop_padding": 2,
    "warmup_steps": 100,
    "lr_schedule": "cosine",
    "grad_clip": 1.0,
}

SYNTHETIC_PROFILE = {
    "num_classes": 4,
    "samples_per_class": 200,
    "image_size": 32,
    "blob_min_value": 0.8,
    "blob_radius": (3, 5),
    "noise_max": 0.2,
}

ROLLOUT_DEFAULTS = {
    "alpha": 1.0,
    "norm_kind": "l2",
    "weight_scope": "per_layer",
    "row_normalize": True,
    "baseline_residual": True,
}

PERTURBATION_DEFAULTS = {
    "steps": None,  # None -> one patch per step
    "insertion_baseline": "blur",
    "deletion_baseline": "zero",
    "gray_value": 0.5,
}

# Constant saliency maps normalize to this value
CONSTANT_MAP_VALUE = 0.5

# Weight files
WEIGHTS_MAGIC = b"GMARW001"
WEIGHTS_SUFFIX = ".gmarw"

# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
