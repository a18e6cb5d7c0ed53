"""
Reverse-mode differentiation.

A :class:`Variable` wraps a NumPy array and, when it was produced by a
differentiable op, links to its parents and to whatever the op saved for the
backward pass. The graph reachable from a loss is the tape: :func:`backward`
orders it topologically and applies one registered backward rule per node.

Backward rules live in a registry keyed by op name so they can be swapped for
a test (:func:`override_rule`).
"""

from __future__ import annotations

import hashlib
import threading
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from typing import Any

import numpy as np

from backeisnn.utils.errors import NumericError, ShapeError


BackwardRule = Callable[["Variable", np.ndarray], tuple["np.ndarray | None", ...]]

_RULES: dict[str, BackwardRule] = {}
_state = threading.local()


class GraphError(RuntimeError):
    """Raised when the recorded graph is not a DAG."""


class Variable:
    __slots__ = ("value", "grad", "parents", "op", "saved", "requires_grad", "name")

    def __init__(
        self,
        value: np.ndarray,
        parents: tuple["Variable", ...] = (),
        op: str = "leaf",
        saved: dict[str, Any] | None = None,
        requires_grad: bool = False,
        name: str | None = None,
    ) -> None:
        self.value = value
        self.grad: np.ndarray | None = None
        self.parents = parents
        self.op = op
        self.saved = saved or {}
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def dtype(self) -> np.dtype:
        return self.value.dtype

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Variable(op={self.op!r}{label} shape={self.shape} dtype={self.dtype})"


def constant(value: np.ndarray | float, dtype: np.dtype | None = None) -> Variable:
    return Variable(np.asarray(value, dtype=dtype))


def parameter(value: np.ndarray, name: str) -> Variable:
    return Variable(value, requires_grad=True, name=name)


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Build values only; nothing recorded for backward (per thread)."""
    previous = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


def backward_rule(op: str) -> Callable[[BackwardRule], BackwardRule]:
    def register(rule: BackwardRule) -> BackwardRule:
        _RULES[op] = rule
        return rule

    return register


@contextmanager
def override_rule(op: str, rule: BackwardRule) -> Iterator[None]:
    """Temporarily replace the backward rule of ``op``."""
    if op not in _RULES:
        raise KeyError(f"No backward rule registered for op {op!r}")
    original = _RULES[op]
    _RULES[op] = rule
    try:
        yield
    finally:
        _RULES[op] = original


def make_node(op: str, value: np.ndarray, parents: tuple[Variable, ...], **saved: Any) -> Variable:
    requires = is_grad_enabled() and any(p.requires_grad for p in parents)
    if not requires:
        return Variable(value, op=op)
    return Variable(value, parents=parents, op=op, saved=saved, requires_grad=True)


def topological_order(root: Variable) -> list[Variable]:
    """Parents before children; raises :class:`GraphError` on a cycle."""
    order: list[Variable] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: list[tuple[Variable, int]] = [(root, 0)]
    while stack:
        node, child_index = stack.pop()
        key = id(node)
        if child_index == 0:
            mark = state.get(key)
            if mark == 2:
                continue
            if mark == 1:
                raise GraphError(f"cycle detected at {node!r}")
            state[key] = 1
        if child_index < len(node.parents):
            stack.append((node, child_index + 1))
            parent = node.parents[child_index]
            parent_mark = state.get(id(parent))
            if parent_mark == 1:
                raise GraphError(f"cycle detected at {parent!r}")
            if parent_mark is None:
                stack.append((parent, 0))
        else:
            state[key] = 2
            order.append(node)
    return order


def backward(loss: Variable, accumulate: bool = False) -> dict[str, np.ndarray]:
    """
    Gradients of a scalar ``loss`` for every named leaf that requires grad.

    The returned map is freshly built for this call. With ``accumulate=True``
    the gradients are also added into each leaf's ``grad``.
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {tuple(loss.value.shape)}")
    if not loss.requires_grad:
        return {}

    order = topological_order(loss)
    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    leaf_grads: dict[str, np.ndarray] = {}

    for node in reversed(order):
        grad = pending.pop(id(node), None)
        if grad is None:
            continue
        if node.is_leaf:
            if node.requires_grad:
                if node.name is None:
                    raise GraphError(f"learnable leaf without a name: {node!r}")
                if node.name in leaf_grads:
                    leaf_grads[node.name] = leaf_grads[node.name] + grad
                else:
                    leaf_grads[node.name] = grad
            continue
        rule = _RULES.get(node.op)
        if rule is None:
            raise GraphError(f"No backward rule registered for op {node.op!r}")
        parent_grads = rule(node, grad)
        for parent, parent_grad in zip(node.parents, parent_grads):
            if parent_grad is None or not parent.requires_grad:
                continue
            if parent_grad.shape != parent.value.shape:
                raise ShapeError(
                    f"backward rule {node.op!r} returned gradient of shape {parent_grad.shape} "
                    f"for parent of shape {parent.value.shape}"
                )
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + parent_grad
            else:
                pending[key] = parent_grad

    for name, grad in leaf_grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient for parameter {name}")

    if accumulate:
        for node in order:
            if node.is_leaf and node.requires_grad and node.name in leaf_grads:
                g = leaf_grads[node.name]
                node.grad = g.copy() if node.grad is None else node.grad + g
    return leaf_grads


def region_signature(root: Variable) -> str:
    """
    Digest of the piecewise regions (below/inside/above a ramp, sign of an
    absolute value, pooling winners) every node in the graph landed in.
    Two evaluations with the same signature lie on the same smooth piece.
    """
    digest = hashlib.sha1()
    for node in topological_order(root):
        region = node.saved.get("region")
        if region is not None:
            digest.update(node.op.encode("utf-8"))
            digest.update(np.ascontiguousarray(region).tobytes())
    return digest.hexdigest()
