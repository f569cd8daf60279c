"""Central finite-difference check of reverse-mode gradients."""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import OracleInvalidError
from . import layers
from .tensor import Tensor

# retries with a 10x smaller step when a probe straddles a leaky-ReLU kink
KINK_RETRIES = 3
# a component is resolvable when it exceeds RESOLUTION_FACTOR ulps of f per unit step
RESOLUTION_FACTOR = 1e4


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    kink_skipped: int
    unresolved: int
    worst_index: tuple | None = None

    def __float__(self) -> float:
        return float(self.max_rel_error)


@contextmanager
def _record_kinks():
    previous = layers._kink_log
    layers._kink_log = []
    try:
        yield layers._kink_log
    finally:
        layers._kink_log = previous


def _scalarize(out: Tensor, projection: np.ndarray | None) -> Tensor:
    if out.size == 1:
        return out.sum()
    return (out * Tensor(projection)).sum()


def _same_pattern(a: list, b: list) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(fn: Callable[..., Tensor], inputs: Sequence[Tensor], epsilon: float = 1e-5,
               max_probes: int | None = None, seed: int = 0, resolve: bool = True,
               full_output: bool = False):
    """Largest relative disagreement between analytic and numeric gradients.

    ``fn(*inputs)`` may return any shape; non-scalar outputs are reduced by a
    fixed random projection so every output element contributes.  For each
    input with ``requires_grad`` the gradient is compared, element by element,
    against ``(f(x + eps) - f(x - eps)) / (2 eps)`` using
    ``|a - n| / max(1e-8, |a| + |n|)``.

    A probe whose two evaluations change the sign pattern of any leaky-ReLU
    input is repeated with a smaller step, so the comparison never straddles
    a kink; probes that still straddle one are skipped.

    With ``resolve`` on, components whose analytic and numeric values are
    both smaller than the round-off resolution of the difference quotient,
    ``1e4 * ulp(f) / eps``, are counted as unresolved rather than scored:
    double precision cannot pin them to 1e-4 relative accuracy.

    Parameters
    ----------
    max_probes : int, optional
        Check at most this many randomly chosen elements per input (all
        elements when None).
    seed : int
        Seed for the projection and the probe selection.
    full_output : bool
        Return a :class:`GradCheckResult` instead of the bare maximum.

    Raises
    ------
    OracleInvalidError
        If two forward passes on identical inputs disagree.
    """
    rng = np.random.default_rng(seed)
    first = fn(*inputs)
    second = fn(*inputs)
    if first.shape != second.shape or not np.array_equal(first.data, second.data):
        raise OracleInvalidError("function is not deterministic: repeated forward passes differ")
    projection = None if first.size == 1 else rng.standard_normal(first.shape)

    for t in inputs:
        t.grad = None
    with _record_kinks() as base_pattern:
        value = _scalarize(fn(*inputs), projection)
        value.backward()
    base_pattern = list(base_pattern)
    resolution = RESOLUTION_FACTOR * float(np.spacing(max(1.0, abs(value.item())))) / epsilon

    def evaluate() -> tuple[float, list]:
        with _record_kinks() as pattern:
            value = _scalarize(fn(*inputs), projection).item()
        return value, list(pattern)

    worst = 0.0
    worst_index = None
    checked = kinked = unresolved = 0
    for k, t in enumerate(inputs):
        if not t.requires_grad:
            continue
        analytic = np.zeros(t.shape) if t.grad is None else t.grad.copy()
        if max_probes is None or max_probes >= t.size:
            probes = np.arange(t.size)
        else:
            probes = rng.choice(t.size, size=max_probes, replace=False)
        for flat_idx in probes:
            idx = np.unravel_index(flat_idx, t.shape)
            original = t.data[idx]
            step = epsilon
            numeric = None
            for _ in range(KINK_RETRIES + 1):
                t.data[idx] = original + step
                up, up_pattern = evaluate()
                t.data[idx] = original - step
                down, down_pattern = evaluate()
                t.data[idx] = original
                if _same_pattern(up_pattern, base_pattern) and _same_pattern(down_pattern, base_pattern):
                    numeric = (up - down) / (2.0 * step)
                    break
                step /= 10.0
            if numeric is None:
                kinked += 1
                continue
            a = analytic[idx]
            if resolve and abs(a) < resolution and abs(numeric) < resolution:
                unresolved += 1
                continue
            checked += 1
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            if err > worst:
                worst, worst_index = err, (k, *idx)
    for t in inputs:
        t.grad = None
    if full_output:
        return GradCheckResult(worst, checked, kinked, unresolved, worst_index)
    return worst
