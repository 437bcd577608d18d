"""
GMAR - System Check

Verifies interpreter, layout, dependencies and a tiny end-to-end pass.
"""
import sys
from pathlib import Path

print("="*60)
print("GMAR - SYSTEM CHECK")
print("="*60)

# Check 1: Python Version
print("\n[1/6] Python Version")
version = sys.version_info
if version.major >= 3 and version.minor >= 10:
    print(f"    [OK] Python {version.major}.{version.minor}.{version.micro}")
else:
    print(f"    [WARN] Python {version.major}.{version.minor} - recommend 3.10+")

# Check 2: Directory Structure
print("\n[2/6] Directory Structure")
required_dirs = [
    "gmar/tensor",
    "gmar/model",
    "gmar/attribution",
    "gmar/metrics",
    "gmar/data",
    "gmar/training",
    "gmar/logging",
    "tests",
]
all_dirs_ok = True
for dir_path in required_dirs:
    if Path(dir_path).exists():
        print(f"    [OK] {dir_path}/")
    else:
        print(f"    [FAIL] {dir_path}/ missing")
        all_dirs_ok = False

# Check 3: Core Files
print("\n[3/6] Core Files")
required_files = [
    "gmar/config.py",
    "gmar/errors.py",
    "gmar/cli.py",
    "gmar/tensor/tape.py",
    "gmar/tensor/ops.py",
    "gmar/model/vit.py",
    "gmar/model/trace.py",
    "gmar/attribution/rollout.py",
    "gmar/attribution/gradcam.py",
    "gmar/metrics/perturbation.py",
    "gmar/data/weights.py",
    "gmar/training/trainer.py",
    "requirements.txt",
    "pytest.ini",
]
all_files_ok = True
for file_path in required_files:
    if Path(file_path).exists():
        print(f"    [OK] {file_path}")
    else:
        print(f"    [FAIL] {file_path} missing")
        all_files_ok = False

# Check 4: Python Dependencies
print("\n[4/6] Python Dependencies")
dependencies = {
    "numpy": "NumPy",
    "scipy": "SciPy",
    "pandas": "Pandas",
    "pytest": "pytest",
}

missing = []
for module, name in dependencies.items():
    try:
        __import__(module)
        print(f"    [OK] {name}")
    except ImportError:
        print(f"    [FAIL] {name} - run: pip install -r requirements.txt")
        missing.append(name)

# Check 5: Profiles
print("\n[5/6] Profiles")
try:
    from gmar.config import TOY_VIT_PROFILE, REFERENCE_VIT_PROFILE
    from gmar.model import ViTConfig
    toy = ViTConfig.from_profile(TOY_VIT_PROFILE)
    reference = ViTConfig.from_profile(REFERENCE_VIT_PROFILE)
    print("    [OK] ViT profiles valid")
    print(f"         - Toy: {toy.num_tokens} tokens, {toy.num_layers}x{toy.num_heads} heads")
    print(f"         - Reference: {reference.num_tokens} tokens, {reference.num_layers}x{reference.num_heads} heads")
except Exception as e:
    print(f"    [FAIL] Could not load profiles: {e}")

# Check 6: Gradient Smoke Test
print("\n[6/6] Gradient Smoke Test")
smoke_ok = False
try:
    import numpy as np
    from gmar.attribution import Method, explain
    from gmar.model import init_params
    from gmar.tensor import grad_check, ops

    error = grad_check(lambda t: ops.sum_axis(ops.square(ops.softmax_lastdim(t))), np.random.default_rng(0).normal(size=(3, 4)))
    print(f"    [OK] softmax gradient check, relative error {error:.2e}")
    explanation = explain(init_params(toy, 0), np.full((toy.image_size, toy.image_size, 3), 0.5), Method.GMAR_L2)
    print(f"    [OK] gmar-l2 explanation on a gray image, grid {explanation.saliency.grid.shape}")
    smoke_ok = True
except Exception as e:
    print(f"    [FAIL] Smoke test failed: {e}")

# Summary
print("\n" + "="*60)
print("SUMMARY")
print("="*60)

if all_dirs_ok and all_files_ok:
    print("[OK] File structure complete")
else:
    print("[FAIL] File structure incomplete")

if not missing:
    print("[OK] All dependencies installed")
else:
    print(f"[TODO] Install missing: {', '.join(missing)}")

if smoke_ok:
    print("[OK] Autodiff and explanation pipeline working")
else:
    print("[FAIL] Smoke test did not pass")

print("\n" + "="*60)
print("NEXT STEPS")
print("="*60)

if missing:
    print("1. Install dependencies: pip install -r requirements.txt")
else:
    print("1. Fast tests: pytest -m 'not slow'")
    print("2. Train the toy model: python -m gmar train-toy --out model.gmarw --seed 42")
    print("3. Benchmark: pytest -m slow")

print("="*60)
