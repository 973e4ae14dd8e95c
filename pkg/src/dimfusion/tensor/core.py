"""Reverse-mode autodiff over dense float64 arrays.

Values are held in :class:`Tensor` nodes; every op records the backward
closure needed to push gradients to its parents. Gradient buffers produced
by :func:`backward` are read-only by convention: transform them by
allocating, never in place.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class NonScalarRoot(ValueError):
    """Raised when backward is started from a non-scalar node."""


_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph recording (forward values only)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """Dense n-dimensional float64 value with optional gradient support.

    ``grad`` is materialized by :func:`backward`; it always matches ``shape``.
    ``parents`` holds the producing operation's inputs, in evaluation order.
    The backward closure returns one gradient array per parent (or None for
    parents that need none).
    """

    __slots__ = ("data", "grad", "parents", "_backward_fn", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[np.ndarray], None] | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # Operator sugar; implementations live in dimfusion.tensor.ops.
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __neg__(self):
        from . import ops

        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_node(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward_fn: Callable[[np.ndarray], tuple],
) -> Tensor:
    """Create an op output node, pruning the graph where no parent needs grads."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = ""
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.parents = tuple(parents)
        out._backward_fn = backward_fn
        out.requires_grad = True
    else:
        out.parents = ()
        out._backward_fn = None
        out.requires_grad = False
    return out


@dataclass
class Graph:
    """Topologically ordered computation graph: parents precede children."""

    nodes: list[Tensor]


def build_graph(root: Tensor) -> Graph:
    """Collect the subgraph reaching ``root``, topologically ordered.

    Iterative DFS; only nodes that require gradients are included.
    """
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in visited and p.requires_grad:
                stack.append((p, False))
    return Graph(order)


def backward(root: Tensor, graph: Graph | None = None, seed: float = 1.0) -> None:
    """Accumulate d(root)/d(node) into ``.grad`` for every node reaching root.

    ``root`` must be scalar. Existing ``.grad`` buffers on leaves are added
    to, so batched losses can accumulate across calls.
    """
    if root.data.size != 1:
        raise NonScalarRoot(f"backward root must be scalar, got shape {root.shape}")
    if graph is None:
        graph = build_graph(root)
    pending: dict[int, np.ndarray] = {id(root): np.full(root.shape, seed)}
    for node in reversed(graph.nodes):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node.grad is None:
            node.grad = g
        else:
            node.grad = node.grad + g
        if node._backward_fn is not None:
            parent_grads = node._backward_fn(g)
            for p, pg in zip(node.parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                cur = pending.get(id(p))
                pending[id(p)] = pg if cur is None else cur + pg


def leaves_of(graph: Graph) -> list[Tensor]:
    return [n for n in graph.nodes if not n.parents and n.requires_grad]
