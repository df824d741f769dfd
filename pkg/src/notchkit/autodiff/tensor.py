"""A small reverse-mode autodiff engine over float32 numpy arrays.

Only what the models in this package need: elementwise arithmetic, a
handful of layer ops (defined in ``ops.py``) and scalar reductions.  Each
``Tensor`` wraps an ndarray plus, when it was produced by an op, a closure
that propagates its gradient to its parents.  ``backward()`` runs a
topological sort and accumulates ``grad`` on every tensor that asked for it.

Numeric hygiene: with debug checks enabled (``set_debug_checks(True)``)
every op output and every accumulated gradient is scanned for NaN/Inf and a
``NumericError`` names the offending op.  Training loops keep a cheap
always-on check of the scalar loss instead.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from ..errors import NumericError

_DEBUG_CHECKS = False


def set_debug_checks(enabled: bool) -> None:
    """Toggle NaN/Inf scanning of every forward/backward array (slow)."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)


def debug_checks_enabled() -> bool:
    return _DEBUG_CHECKS


def _check_finite(arr: np.ndarray, what: str) -> None:
    if _DEBUG_CHECKS and not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")


class Tensor:
    """float32 ndarray with an optional grad and a backward closure."""

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf",
                 parents: tuple["Tensor", ...] = (),
                 backward: Callable[[np.ndarray], None] | None = None):
        self.data = np.asarray(data, dtype=np.float32)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.op = op
        self._parents = parents
        self._backward = backward
        _check_finite(self.data, f"output of op '{op}'")

    # -- basic introspection -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # -- autodiff ------------------------------------------------------------
    def _accumulate(self, g: np.ndarray) -> None:
        g = np.asarray(g, dtype=np.float32)
        if g.shape != self.data.shape:
            raise NumericError(
                f"gradient shape {g.shape} does not match tensor shape "
                f"{self.data.shape} (op '{self.op}')"
            )
        _check_finite(g, f"gradient into op '{self.op}'")
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Backpropagate from this tensor.

        Without an explicit ``grad`` the tensor must be scalar and is seeded
        with 1.  Gradients accumulate on every tensor in the graph with
        ``requires_grad`` set (leaves and interior nodes alike, which is what
        lets an input-perturbation attack read the gradient at the image).
        """
        if grad is None:
            if self.data.size != 1:
                raise NumericError("backward() without a gradient needs a scalar tensor")
            grad = np.ones_like(self.data)

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:  # iterative DFS; graphs are deep enough to bother
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        self._accumulate(np.asarray(grad, dtype=np.float32))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            if not node.requires_grad and node._parents:
                node.grad = None  # interior scratch, free it

    # -- elementwise arithmetic ----------------------------------------------
    def _binary(self, other, fwd, bwd_self, bwd_other, name):
        other_t = other if isinstance(other, Tensor) else Tensor(np.asarray(other, np.float32))
        out_data = fwd(self.data, other_t.data)
        need = self.requires_grad or other_t.requires_grad or \
            self._parents != () or other_t._parents != ()

        if not need:
            return Tensor(out_data, op=name)

        def backward(g: np.ndarray) -> None:
            self._accumulate(_unbroadcast(bwd_self(g, self.data, other_t.data), self.data.shape))
            other_t._accumulate(_unbroadcast(bwd_other(g, self.data, other_t.data), other_t.data.shape))

        return Tensor(out_data, op=name, parents=(self, other_t), backward=backward)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b,
                            lambda g, a, b: g, lambda g, a, b: g, "add")

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b,
                            lambda g, a, b: g, lambda g, a, b: -g, "sub")

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a,
                            lambda g, a, b: -g, lambda g, a, b: g, "rsub")

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b,
                            lambda g, a, b: g * b, lambda g, a, b: g * a, "mul")

    __rmul__ = __mul__

    def __neg__(self):
        return self * np.float32(-1.0)

    def sum(self) -> "Tensor":
        out_data = np.asarray(self.data.sum(), dtype=np.float32)
        if not (self.requires_grad or self._parents):
            return Tensor(out_data, op="sum")

        def backward(g: np.ndarray) -> None:
            self._accumulate(np.broadcast_to(g, self.data.shape))

        return Tensor(out_data, op="sum", parents=(self,), backward=backward)

    def mean(self) -> "Tensor":
        return self.sum() * np.float32(1.0 / self.data.size)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def collect_parameters(params: Iterable[Tensor]) -> list[Tensor]:
    """Materialise a parameter iterable, asserting each requires grad."""
    out = list(params)
    for p in out:
        if not p.requires_grad:
            raise NumericError("parameter tensor without requires_grad")
    return out
