"""Dense matrix helpers and a small reverse-mode differentiation tape.

Everything operates on 2-D float64 numpy arrays. The tape records one node
per operation in execution order, so node inputs always point at earlier
nodes and a single reverse sweep computes all gradients.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

# Norm floor used by the backward rule of row_norm_pow: the gradient of
# ||x||^beta is undefined at x = 0 for beta < 2, we take the zero subgradient.
NORM_FLOOR = 1e-12


def as_matrix(x) -> np.ndarray:
    """Coerce input to a 2-D float64 array (1-D input becomes a row)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check, accumulated in float64."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dimensions disagree, {a.shape} @ {b.shape}")
    return a @ b


def row_norm_pow(x: np.ndarray, beta: float) -> np.ndarray:
    """Per-row Euclidean norm raised to ``beta``, returned as an n-by-1 column.

    ``beta`` must lie in (0, 2]; beta=2 gives squared norms, beta=1 plain norms.
    """
    if not 0.0 < beta <= 2.0:
        raise ValueError(f"row_norm_pow: beta must be in (0, 2], got {beta}")
    x = as_matrix(x)
    sq = np.sum(x * x, axis=1, keepdims=True)
    return sq ** (beta / 2.0)


class Node:
    """One recorded operation: its output value and the rule to push gradients back."""

    __slots__ = ("nid", "op", "value", "parents", "grad", "_vjp")

    def __init__(self, nid, op, value, parents, vjp):
        self.nid = nid
        self.op = op
        self.value = value
        self.parents = parents
        self.grad = None
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node({self.nid}, {self.op}, shape={self.value.shape})"


class Tape:
    """Append-only record of matrix operations supporting one backward sweep.

    A tape is built fresh for every forward pass (define-by-run) and is owned
    by a single worker for its whole forward+backward lifetime.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def _record(self, op: str, value: np.ndarray, parents: Sequence[Node],
                vjp: Callable | None) -> Node:
        node = Node(len(self.nodes), op, value, tuple(p.nid for p in parents), vjp)
        self.nodes.append(node)
        return node

    # -- leaves ------------------------------------------------------------

    def leaf(self, value, op: str = "leaf") -> Node:
        return self._record(op, as_matrix(value), (), None)

    # -- arithmetic --------------------------------------------------------

    def add(self, a: Node, b: Node) -> Node:
        """Elementwise sum; ``b`` may be a 1-by-m row broadcast over a's rows."""
        broadcast = b.value.shape != a.value.shape
        if broadcast and not (b.value.shape == (1, a.value.shape[1])):
            raise ValueError(f"add: incompatible shapes {a.value.shape} + {b.value.shape}")

        def vjp(g):
            gb = g.sum(axis=0, keepdims=True) if broadcast else g
            return g, gb

        return self._record("add", a.value + b.value, (a, b), vjp)

    def sub(self, a: Node, b: Node) -> Node:
        if a.value.shape != b.value.shape:
            raise ValueError(f"sub: incompatible shapes {a.value.shape} - {b.value.shape}")

        def vjp(g):
            return g, -g

        return self._record("sub", a.value - b.value, (a, b), vjp)

    def scale(self, a: Node, c: float) -> Node:
        c = float(c)

        def vjp(g):
            return (c * g,)

        return self._record("scale", c * a.value, (a,), vjp)

    def matmul(self, a: Node, b: Node) -> Node:
        if a.value.shape[1] != b.value.shape[0]:
            raise ValueError(
                f"matmul: inner dimensions disagree, {a.value.shape} @ {b.value.shape}")
        av, bv = a.value, b.value

        def vjp(g):
            return g @ bv.T, av.T @ g

        return self._record("matmul", av @ bv, (a, b), vjp)

    # -- structure ---------------------------------------------------------

    def concat_cols(self, a: Node, b: Node) -> Node:
        if a.value.shape[0] != b.value.shape[0]:
            raise ValueError(
                f"concat_cols: row counts disagree, {a.value.shape} | {b.value.shape}")
        na = a.value.shape[1]

        def vjp(g):
            return g[:, :na], g[:, na:]

        return self._record("concat_cols", np.concatenate([a.value, b.value], axis=1),
                            (a, b), vjp)

    def slice_cols(self, a: Node, start: int, stop: int) -> Node:
        n, m = a.value.shape
        if not 0 <= start <= stop <= m:
            raise ValueError(f"slice_cols: [{start}:{stop}] out of range for {a.value.shape}")

        def vjp(g):
            ga = np.zeros((n, m))
            ga[:, start:stop] = g
            return (ga,)

        return self._record("slice_cols", a.value[:, start:stop].copy(), (a,), vjp)

    # -- nonlinearities ----------------------------------------------------

    def relu(self, a: Node) -> Node:
        mask = a.value > 0

        def vjp(g):
            return (g * mask,)

        return self._record("relu", np.where(mask, a.value, 0.0), (a,), vjp)

    def leaky_relu(self, a: Node, slope: float = 0.01) -> Node:
        mask = a.value > 0

        def vjp(g):
            return (np.where(mask, g, slope * g),)

        return self._record("leaky_relu", np.where(mask, a.value, slope * a.value),
                            (a,), vjp)

    # -- reductions --------------------------------------------------------

    def mean_reduce(self, a: Node) -> Node:
        n, m = a.value.shape
        size = n * m

        def vjp(g):
            return (np.full((n, m), g[0, 0] / size),)

        return self._record("mean_reduce", np.array([[a.value.mean()]]), (a,), vjp)

    def row_norm_pow(self, a: Node, beta: float) -> Node:
        """Row norms to the power beta; zero-norm rows get a zero gradient."""
        if not 0.0 < beta <= 2.0:
            raise ValueError(f"row_norm_pow: beta must be in (0, 2], got {beta}")
        av = a.value
        sq = np.sum(av * av, axis=1, keepdims=True)
        norm = np.sqrt(sq)

        def vjp(g):
            # d||x||^b / dx = b * ||x||^(b-2) * x, with the norm floored so
            # coincident rows (x = 0) come back as exactly zero instead of NaN.
            factor = beta * np.maximum(norm, NORM_FLOOR) ** (beta - 2.0)
            return (g * factor * av,)

        return self._record("row_norm_pow", sq ** (beta / 2.0), (a,), vjp)

    # -- reverse sweep -----------------------------------------------------

    def backward(self, loss: Node) -> dict[int, np.ndarray]:
        """Populate gradients for every ancestor of ``loss`` (a 1x1 node).

        Returns a map from node id to gradient. Nodes not reachable from the
        loss get a zero gradient of their own shape.
        """
        if loss.value.shape != (1, 1):
            raise ValueError(f"backward: loss must be 1x1, got shape {loss.value.shape}")
        for node in self.nodes:
            node.grad = None
        loss.grad = np.ones((1, 1))
        for node in reversed(self.nodes[: loss.nid + 1]):
            if node.grad is None or node._vjp is None:
                continue
            parent_grads = node._vjp(node.grad)
            for pid, pg in zip(node.parents, parent_grads):
                parent = self.nodes[pid]
                if parent.grad is None:
                    parent.grad = np.zeros(parent.value.shape)
                parent.grad += pg
        for node in self.nodes:
            if node.grad is None:
                node.grad = np.zeros(node.value.shape)
        return {node.nid: node.grad for node in self.nodes}


def backward(tape: Tape, loss: Node) -> dict[int, np.ndarray]:
    """Module-level alias for ``tape.backward(loss)``."""
    return tape.backward(loss)
