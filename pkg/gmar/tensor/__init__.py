"""Dense float64 tensors with a reverse-mode gradient tape"""
from gmar.tensor.tape import GradientStore, Node, Tape
from gmar.tensor.tensor import Tensor, as_tensor
from gmar.tensor.gradcheck import grad_check, numeric_gradient, relative_error, taped_gradient
from gmar.tensor import ops

__all__ = [
    "GradientStore",
    "Node",
    "Tape",
    "Tensor",
    "as_tensor",
    "grad_check",
    "numeric_gradient",
    "relative_error",
    "taped_gradient",
    "ops",
]
