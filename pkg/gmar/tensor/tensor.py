"""
Tensor - immutable float64 array, optionally bound to a tape node
"""
from typing import Optional, Tuple

import numpy as np

from gmar.errors import DimensionError


class Tensor:
    """
    Dense row-major float64 array.

    A Tensor produced by an op on a taped input carries the tape and the
    id of the node that produced it. The underlying array is read-only;
    read-only contiguous float64 input is shared instead of copied.
    """

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data, tape=None, node_id: Optional[int] = None, copy: bool = True):
        array = np.asarray(data, dtype=np.float64)
        if copy and array.flags.writeable:
            array = array.copy()
        if not array.flags.c_contiguous:
            array = array.copy(order="C")
        if array.ndim > 0 and 0 in array.shape:
            raise DimensionError(f"empty tensor of shape {array.shape}")
        array.setflags(write=False)
        self.data = array
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def tape_id(self) -> Optional[int]:
        return self.node_id

    @property
    def taped(self) -> bool:
        return self.tape is not None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        where = f", node={self.node_id}" if self.tape is not None else ""
        return f"Tensor(shape={self.shape}{where})"

    # operator sugar over gmar.tensor.ops
    def __add__(self, other):
        from gmar.tensor import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from gmar.tensor import ops
        return ops.sub(self, other)

    def __neg__(self):
        from gmar.tensor import ops
        return ops.neg(self)

    def __mul__(self, other):
        from gmar.tensor import ops
        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.mul_scalar(self, float(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        from gmar.tensor import ops
        return ops.matmul(self, other)


def as_tensor(value) -> Tensor:
    """Pass Tensors through, wrap anything else as an untaped constant."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
