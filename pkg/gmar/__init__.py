"""GMAR - Gradient-driven multi-head attention rollout for Vision Transformers"""

__version__ = "0.1.0"
