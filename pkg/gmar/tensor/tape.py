"""
Gradient Tape - reverse-mode bookkeeping

A Tape is an ordered list of nodes. Each node records the op that produced
it, its parent node ids and a vector-Jacobian closure over the values the
backward rule needs. Nodes are appended in execution order, so parents
always precede children.

One tape per inference. Tapes are not thread-safe; separate tapes may run
concurrently.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from gmar.errors import ContractError, StateError

# vjp(grad_of_output) -> one gradient (or None) per parent
VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class Node:
    node_id: int
    op: str
    parents: Tuple[int, ...]
    shape: Tuple[int, ...]
    vjp: Optional[VJP] = None


class GradientStore:
    """
    Gradients keyed by node id, as produced by `Tape.backward`.

    Index with a Tensor or a node id. Nodes that the loss does not depend
    on report zeros of their value's shape.
    """

    def __init__(self, tape: "Tape", grads: Dict[int, np.ndarray]):
        self._tape = tape
        self._grads = grads

    def __getitem__(self, key) -> np.ndarray:
        node_id = key if isinstance(key, int) else key.node_id
        if node_id is None:
            raise StateError("tensor is not on this tape")
        if node_id in self._grads:
            return self._grads[node_id]
        return np.zeros(self._tape.nodes[node_id].shape)

    def __contains__(self, key) -> bool:
        node_id = key if isinstance(key, int) else key.node_id
        return node_id in self._grads

    def __len__(self) -> int:
        return len(self._grads)


class Tape:
    """Records taped ops; `backward` walks them in reverse."""

    def __init__(self):
        self.nodes: List[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def watch(self, value):
        """
        Register a leaf on this tape.

        Accepts a Tensor or anything numpy can turn into a float64 array.
        Returns a new Tensor bound to the leaf node.
        """
        from gmar.tensor.tensor import Tensor

        data = value.data if isinstance(value, Tensor) else value
        data = np.asarray(data, dtype=np.float64)
        node_id = self._append("leaf", (), data.shape, None)
        return Tensor(data, tape=self, node_id=node_id)

    def record(self, op: str, parents: Sequence, data: np.ndarray, vjp: VJP):
        """Append an op node and return its output Tensor."""
        from gmar.tensor.tensor import Tensor

        parent_ids = []
        for parent in parents:
            if parent.tape is not None and parent.tape is not self:
                raise ContractError(f"op '{op}' mixes tensors from different tapes")
            # untaped parents take part as constants
            parent_ids.append(parent.node_id if parent.tape is self else -1)
        node_id = self._append(op, tuple(parent_ids), data.shape, vjp)
        return Tensor(data, tape=self, node_id=node_id, copy=False)

    def _append(self, op, parents, shape, vjp) -> int:
        node_id = len(self.nodes)
        self.nodes.append(Node(node_id, op, parents, tuple(shape), vjp))
        return node_id

    def backward(self, loss) -> GradientStore:
        """
        Reverse sweep from a scalar loss.

        Seeds 1.0 at the loss and accumulates by addition where a node
        feeds several consumers. Gradients are returned in a fresh store,
        so the same tape may be swept more than once.
        """
        if loss.tape is not self:
            raise ContractError("loss was not recorded on this tape")
        if loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

        grads: Dict[int, np.ndarray] = {loss.node_id: np.ones(loss.shape)}
        for node in reversed(self.nodes[: loss.node_id + 1]):
            grad = grads.get(node.node_id)
            if grad is None or node.vjp is None:
                continue
            parent_grads = node.vjp(grad)
            for parent_id, parent_grad in zip(node.parents, parent_grads):
                if parent_id < 0 or parent_grad is None:
                    continue
                if parent_id in grads:
                    grads[parent_id] = grads[parent_id] + parent_grad
                else:
                    grads[parent_id] = parent_grad
        return GradientStore(self, grads)
