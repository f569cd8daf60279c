"""Weight initialization."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


def xavier_init(shape, fan_in: int, fan_out: int, rng: np.random.Generator) -> Tensor:
    """Glorot-uniform sample on ``[-a, a]`` with ``a = sqrt(6 / (fan_in + fan_out))``."""
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if any(s < 1 for s in shape):
        raise ShapeError(f"invalid shape {shape}: every extent must be positive")
    if fan_in < 1 or fan_out < 1:
        raise ShapeError(f"fan_in and fan_out must be >= 1, got {fan_in}, {fan_out}")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)
