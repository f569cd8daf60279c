"""Minimal reverse-mode automatic differentiation for the model family."""
from .gradcheck import GradCheckResult, grad_check
from .init import xavier_init
from .layers import (BatchNormState, batch_norm1d, bilstm, conv1d, leaky_relu, linear, lstm,
                     softmax, softmax_cross_entropy)
from .optim import AdamState, Parameter, adam_step
from .tensor import Tensor, as_tensor, concat, stack

__all__ = [
    "AdamState", "BatchNormState", "GradCheckResult", "Parameter", "Tensor", "adam_step", "as_tensor",
    "batch_norm1d", "bilstm", "concat", "conv1d", "grad_check", "leaky_relu", "linear",
    "lstm", "softmax", "softmax_cross_entropy", "stack", "xavier_init",
]
