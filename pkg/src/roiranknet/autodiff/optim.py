"""Trainable parameters and the Adam optimizer with L2 penalty."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..errors import OptimizerStateError
from .tensor import Tensor


class Parameter(Tensor):
    """A named leaf tensor that always requires gradients.

    ``decay_exempt`` marks biases and normalization parameters, which the L2
    penalty skips.
    """

    __slots__ = ("name", "decay_exempt")

    def __init__(self, data, name: str, decay_exempt: bool = False):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.decay_exempt = decay_exempt

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    @classmethod
    def for_parameters(cls, params: Iterable[Parameter], **kwargs) -> "AdamState":
        state = cls(**kwargs)
        for p in params:
            state.first_moment[p.name] = np.zeros_like(p.data)
            state.second_moment[p.name] = np.zeros_like(p.data)
        return state


def adam_step(state: AdamState, params: Iterable[Parameter], l2_factor: float = 0.0) -> None:
    """Apply one bias-corrected Adam update in place and clear the gradients.

    The L2 term enters through the gradient as ``2 * l2_factor * w`` for every
    parameter that is not ``decay_exempt``.
    """
    params = list(params)
    for p in params:
        if p.grad is None:
            raise OptimizerStateError(f"parameter {p.name!r} has no gradient")
        if p.name not in state.first_moment:
            raise OptimizerStateError(f"parameter {p.name!r} is not registered with the optimizer")
        if state.first_moment[p.name].shape != p.shape:
            raise OptimizerStateError(f"moment buffer shape mismatch for {p.name!r}")

    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t
    for p in params:
        g = p.grad
        if l2_factor and not p.decay_exempt:
            g = g + 2.0 * l2_factor * p.data
        m = state.first_moment[p.name]
        v = state.second_moment[p.name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
        p.grad = None
