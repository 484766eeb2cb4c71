"""
Dense tensor type and the reverse-mode recording used by every layer op.

Ops record an OpNode into the active Graph (if any) whenever one of their
inputs requires a gradient. `backprop` replays the recorded nodes in reverse.
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ContractViolation

logger = logging.getLogger(__name__)

_local = threading.local()


class Tensor:
    """Float array (float32 unless told otherwise) that can take part in a graph."""

    __slots__ = ("data", "requires_grad", "grad", "name", "version", "__weakref__")

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[np.dtype] = None,
    ):
        self.data = np.ascontiguousarray(data, dtype=dtype or np.float32)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        # bumped by in-place updates; lets backprop detect stale graphs
        self.version = 0

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractViolation(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def sub_(self, delta: np.ndarray) -> None:
        """In-place `data -= delta` for optimizer updates."""
        if delta.shape != self.data.shape:
            raise ContractViolation(f"update shape {delta.shape} does not match {self.data.shape}")
        self.data -= delta.astype(self.data.dtype, copy=False)
        self.version += 1

    def assign_(self, values: np.ndarray) -> None:
        if values.shape != self.data.shape:
            raise ContractViolation(f"assign shape {values.shape} does not match {self.data.shape}")
        self.data[...] = values
        self.version += 1

    def astype(self, dtype: np.dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name, dtype=dtype)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"


def as_tensor(value: Any, dtype: Optional[np.dtype] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value)
    if dtype is None:
        dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else np.float32
    return Tensor(arr, dtype=dtype)


@dataclass
class OpNode:
    kind: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[Dict[str, Any], np.ndarray], Sequence[Optional[np.ndarray]]]
    saved: Dict[str, Any] = field(default_factory=dict)
    input_versions: Tuple[int, ...] = ()


class Graph:
    """Records the ops of one forward pass. Use as a context manager."""

    def __init__(self):
        self.nodes: List[OpNode] = []
        self.consumed = False

    def __enter__(self) -> "Graph":
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)


def _stack() -> List[Graph]:
    if not hasattr(_local, "graphs"):
        _local.graphs = []
    return _local.graphs


def current_graph() -> Optional[Graph]:
    stack = _stack()
    return stack[-1] if stack else None


def record(
    kind: str,
    inputs: Sequence[Tensor],
    output: Tensor,
    backward: Callable[[Dict[str, Any], np.ndarray], Sequence[Optional[np.ndarray]]],
    **saved: Any,
) -> Tensor:
    """Attach `output` to the active graph when any input needs a gradient."""
    graph = current_graph()
    if graph is None or not any(t.requires_grad for t in inputs):
        return output
    output.requires_grad = True
    graph.nodes.append(
        OpNode(
            kind=kind,
            inputs=tuple(inputs),
            output=output,
            backward=backward,
            saved=saved,
            input_versions=tuple(t.version for t in inputs),
        )
    )
    return output


def backprop(
    graph: Graph,
    loss_gradient: Optional[np.ndarray] = None,
    output: Optional[Tensor] = None,
) -> Dict[Tensor, np.ndarray]:
    """
    Reverse-mode pass over a recorded graph.

    Returns the gradient of every leaf tensor that requires one (parameters and
    any input flagged with requires_grad). Leaf `.grad` fields are set as well.
    A graph can be replayed exactly once.
    """
    if graph.consumed:
        raise ContractViolation("Graph was already back-propagated; record a new forward pass")
    if not graph.nodes:
        raise ContractViolation("Graph is empty; nothing requires a gradient")
    for node in graph.nodes:
        if tuple(t.version for t in node.inputs) != node.input_versions:
            raise ContractViolation(f"Stale graph: an input of '{node.kind}' was modified after recording")

    root = output if output is not None else graph.nodes[-1].output
    if loss_gradient is None:
        if root.size != 1:
            raise ContractViolation(f"A loss gradient is required for non-scalar output of shape {root.shape}")
        loss_gradient = np.ones_like(root.data)
    loss_gradient = np.asarray(loss_gradient, dtype=root.dtype)
    if loss_gradient.shape != root.shape:
        raise ContractViolation(f"Loss gradient shape {loss_gradient.shape} does not match output {root.shape}")

    graph.consumed = True
    grads: Dict[int, np.ndarray] = {id(root): loss_gradient}
    produced = {id(node.output) for node in graph.nodes}
    leaves: Dict[int, Tensor] = {}

    for node in reversed(graph.nodes):
        upstream = grads.pop(id(node.output), None)
        if upstream is None:
            continue
        input_grads = node.backward(node.saved, upstream)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if grad.shape != tensor.shape:
                raise ContractViolation(
                    f"'{node.kind}' backward produced shape {grad.shape} for input of shape {tensor.shape}"
                )
            key = id(tensor)
            grads[key] = grads[key] + grad if key in grads else grad
            if key not in produced:
                leaves[key] = tensor

    result: Dict[Tensor, np.ndarray] = {}
    for key, tensor in leaves.items():
        grad = grads.get(key, np.zeros_like(tensor.data)).astype(tensor.dtype, copy=False)
        tensor.grad = grad
        result[tensor] = grad
    logger.debug(f"backprop over {len(graph.nodes)} nodes produced {len(result)} leaf gradients")
    return result
