"""Finite-difference verification of backward passes."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import NumericError
from .tensor import Tensor


def gradient_check(fn: Callable[..., Tensor], inputs: Sequence[Tensor],
                   eps: float = 1e-2) -> float:
    """Compare analytic gradients of ``fn(*inputs)`` against central differences.

    ``fn`` must return a scalar ``Tensor``.  Every input with
    ``requires_grad`` is perturbed one element at a time, so keep the inputs
    small.  Returns the maximum relative error
    ``|analytic - numeric| / max(1, |analytic|, |numeric|)`` over all checked
    elements; raises ``NumericError`` if any value involved is non-finite.
    """
    for t in inputs:
        t.zero_grad()
    out = fn(*inputs)
    if out.data.size != 1:
        raise NumericError("gradient_check needs a scalar-valued function")
    out.backward()

    worst = 0.0
    for t in inputs:
        if not t.requires_grad:
            continue
        if t.grad is None:
            raise NumericError("no gradient reached an input that requires one")
        analytic = t.grad
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(fn(*inputs).data)
            flat[i] = orig - eps
            f_minus = float(fn(*inputs).data)
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError("non-finite value during finite differencing")
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(analytic.reshape(-1)[i])
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err > worst:
                worst = err
    return worst
