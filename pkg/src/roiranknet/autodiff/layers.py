"""Differentiable layers used by the model family.

Each function takes and returns :class:`~roiranknet.autodiff.tensor.Tensor`
objects.  The heavier layers (convolution, normalization, LSTM, the loss) are
single graph nodes with hand-written backward passes; the gradient checker in
:mod:`roiranknet.autodiff.gradcheck` is what keeps them honest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (DegenerateBatchError, InvalidLabelError, SequenceTooShortError,
                      ShapeError)
from .tensor import DTYPE, Tensor, _make, _sigmoid, as_tensor, concat

KERNEL = 3
BN_EPS = 1e-5
BN_MOMENTUM = 0.9
LEAKY_SLOPE = 0.1

# set to a list by the gradient checker to observe activation patterns
_kink_log: list | None = None


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    """Elementwise ``max(x, slope * x)``; the derivative at 0 is ``slope``."""
    x = as_tensor(x)
    positive = x.data > 0
    if _kink_log is not None:
        _kink_log.append(positive)
    scale = np.where(positive, 1.0, slope)
    return _make(x.data * scale, (x,), lambda g: (g * scale,))


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map ``x @ weight.T + bias`` over the last axis of ``x``."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if weight.ndim != 2 or bias.shape != (weight.shape[0],) or x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear: input {x.shape}, weight {weight.shape}, bias {bias.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd.T + bias.data

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        x2 = xd.reshape(-1, xd.shape[-1])
        return g @ wd, g2.T @ x2, g2.sum(axis=0)

    return _make(out, (x, weight, bias), backward)


def conv1d(x: Tensor, weight: Tensor, bias: Tensor, dilation: int = 1) -> Tensor:
    """Valid (unpadded) width-3 convolution with stride 1.

    Parameters
    ----------
    x : Tensor, shape (channels_in, length) or (batch, channels_in, length)
    weight : Tensor, shape (channels_out, channels_in, 3)
    bias : Tensor, shape (channels_out,)
    dilation : int
        Spacing between kernel taps.

    Returns
    -------
    Tensor, shape (..., channels_out, length - 2 * dilation)
    """
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if dilation < 1:
        raise ShapeError("dilation must be a positive integer")
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3:
        raise ShapeError(f"conv1d expects (C, L) or (N, C, L) input, got {x.shape}")
    n, c_in, length = xd.shape
    c_out = weight.shape[0]
    if weight.shape != (c_out, c_in, KERNEL) or bias.shape != (c_out,):
        raise ShapeError(f"conv1d: input channels {c_in}, weight {weight.shape}, bias {bias.shape}")
    span = 1 + (KERNEL - 1) * dilation
    if length < span:
        raise SequenceTooShortError(
            f"sequence of length {length} is shorter than the kernel span {span}")
    l_out = length - (KERNEL - 1) * dilation

    # cols[n, t, c, k] = x[n, c, t + k * dilation]
    cols = np.stack([xd[:, :, k * dilation:k * dilation + l_out] for k in range(KERNEL)], axis=-1)
    cols = cols.transpose(0, 2, 1, 3).reshape(n * l_out, c_in * KERNEL)
    w2 = weight.data.reshape(c_out, c_in * KERNEL)
    out = (cols @ w2.T + bias.data).reshape(n, l_out, c_out).transpose(0, 2, 1)
    if squeeze:
        out = out[0]

    def backward(g):
        if squeeze:
            g = g[None]
        gt = g.transpose(0, 2, 1).reshape(n * l_out, c_out)
        gw = (gt.T @ cols).reshape(weight.shape)
        gb = gt.sum(axis=0)
        gcols = (gt @ w2).reshape(n, l_out, c_in, KERNEL).transpose(0, 2, 1, 3)
        gx = np.zeros_like(xd)
        for k in range(KERNEL):
            gx[:, :, k * dilation:k * dilation + l_out] += gcols[..., k]
        return (gx[0] if squeeze else gx), gw, gb

    return _make(np.ascontiguousarray(out), (x, weight, bias), backward)


@dataclass
class BatchNormState:
    """Running statistics of one normalization layer."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS

    @classmethod
    def fresh(cls, channels: int) -> "BatchNormState":
        return cls(np.zeros(channels, dtype=DTYPE), np.ones(channels, dtype=DTYPE))


def batch_norm1d(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState,
                 training: bool) -> Tensor:
    """Per-channel normalization of ``(batch, channels, length)`` input.

    In training mode statistics are taken over batch and length and folded
    into ``state`` (``running = momentum * running + (1 - momentum) * batch``,
    unbiased variance); in eval mode the running statistics are used.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3:
        raise ShapeError(f"batch_norm1d expects (N, C, L) input, got {x.shape}")
    n, c, length = xd.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batch_norm1d: {c} channels but gamma {gamma.shape}, beta {beta.shape}")
    gd = gamma.data[None, :, None]
    m = n * length

    if training:
        if m < 2:
            raise DegenerateBatchError("batch normalization over a single element per channel")
        mean = xd.mean(axis=(0, 2))
        centered = xd - mean[None, :, None]
        var = (centered * centered).mean(axis=(0, 2))
        mom = state.momentum
        state.running_mean = mom * state.running_mean + (1.0 - mom) * mean
        state.running_var = mom * state.running_var + (1.0 - mom) * var * (m / (m - 1))
    else:
        mean, var = state.running_mean, state.running_var
        centered = xd - mean[None, :, None]
    inv_std = 1.0 / np.sqrt(var + state.eps)
    xhat = centered * inv_std[None, :, None]
    out = gd * xhat + beta.data[None, :, None]
    if squeeze:
        out = out[0]

    def backward(g):
        if squeeze:
            g = g[None]
        ggamma = (g * xhat).sum(axis=(0, 2))
        gbeta = g.sum(axis=(0, 2))
        gxhat = g * gd
        if training:
            gx = (inv_std[None, :, None] / m) * (
                m * gxhat
                - gxhat.sum(axis=(0, 2), keepdims=True)
                - xhat * (gxhat * xhat).sum(axis=(0, 2), keepdims=True))
        else:
            gx = gxhat * inv_std[None, :, None]
        return (gx[0] if squeeze else gx), ggamma, gbeta

    return _make(out, (x, gamma, beta), backward)


def lstm(x: Tensor, w_ih: Tensor, w_hh: Tensor, bias: Tensor) -> Tensor:
    """Unidirectional LSTM over axis 1 of ``(batch, steps, features)`` input.

    Gate rows of the weights are stacked in the order input, forget,
    candidate, output.  Initial hidden and cell states are zero.  Returns the
    hidden state at every step, shape ``(batch, steps, hidden)``.
    """
    x, w_ih, w_hh, bias = as_tensor(x), as_tensor(w_ih), as_tensor(w_hh), as_tensor(bias)
    xd = x.data
    if xd.ndim != 3:
        raise ShapeError(f"lstm expects (batch, steps, features), got {x.shape}")
    batch, steps, features = xd.shape
    hidden = w_hh.shape[1]
    if (w_ih.shape != (4 * hidden, features) or w_hh.shape != (4 * hidden, hidden)
            or bias.shape != (4 * hidden,)):
        raise ShapeError(
            f"lstm: features {features}, w_ih {w_ih.shape}, w_hh {w_hh.shape}, bias {bias.shape}")
    if steps < 1:
        raise ShapeError("lstm needs at least one step")
    H = hidden
    wih, whh = w_ih.data, w_hh.data
    xproj = xd @ wih.T + bias.data

    gates = np.empty((steps, batch, 4 * H))
    cells = np.empty((steps + 1, batch, H))
    hs = np.empty((steps + 1, batch, H))
    tanh_c = np.empty((steps, batch, H))
    cells[0] = 0.0
    hs[0] = 0.0
    for t in range(steps):
        z = xproj[:, t] + hs[t] @ whh.T
        act = gates[t]
        act[:, :2 * H] = _sigmoid(z[:, :2 * H])
        act[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        act[:, 3 * H:] = _sigmoid(z[:, 3 * H:])
        i, f, gg, o = act[:, :H], act[:, H:2 * H], act[:, 2 * H:3 * H], act[:, 3 * H:]
        cells[t + 1] = f * cells[t] + i * gg
        tanh_c[t] = np.tanh(cells[t + 1])
        hs[t + 1] = o * tanh_c[t]
    out = hs[1:].transpose(1, 0, 2).copy()

    def backward(gout):
        dz = np.empty((steps, batch, 4 * H))
        dh_next = np.zeros((batch, H))
        dc_next = np.zeros((batch, H))
        for t in reversed(range(steps)):
            act = gates[t]
            i, f, gg, o = act[:, :H], act[:, H:2 * H], act[:, 2 * H:3 * H], act[:, 3 * H:]
            dh = gout[:, t] + dh_next
            tc = tanh_c[t]
            dc = dc_next + dh * o * (1.0 - tc * tc)
            d = dz[t]
            d[:, :H] = dc * gg * i * (1.0 - i)
            d[:, H:2 * H] = dc * cells[t] * f * (1.0 - f)
            d[:, 2 * H:3 * H] = dc * i * (1.0 - gg * gg)
            d[:, 3 * H:] = dh * tc * o * (1.0 - o)
            dc_next = dc * f
            dh_next = d @ whh
        dz_b = dz.transpose(1, 0, 2)
        gx = dz_b @ wih
        gwih = np.einsum("bsg,bsf->gf", dz_b, xd)
        gwhh = np.einsum("sbg,sbh->gh", dz, hs[:-1])
        gb = dz.sum(axis=(0, 1))
        return gx, gwih, gwhh, gb

    return _make(out, (x, w_ih, w_hh, bias), backward)


def bilstm(sequence: Tensor, forward_params, backward_params) -> Tensor:
    """Bidirectional LSTM.

    ``sequence`` is ``(steps, features)`` or ``(batch, steps, features)``;
    each ``*_params`` is a ``(w_ih, w_hh, bias)`` triple.  Step ``j`` of the
    output is ``[forward_j, backward_j]`` where the forward state has consumed
    steps ``0..j`` and the backward state steps ``last..j``.
    """
    sequence = as_tensor(sequence)
    squeeze = sequence.ndim == 2
    if squeeze:
        sequence = sequence.reshape(1, *sequence.shape)
    fwd = lstm(sequence, *forward_params)
    bwd = lstm(sequence[:, ::-1], *backward_params)[:, ::-1]
    out = concat([fwd, bwd], axis=-1)
    return out[0] if squeeze else out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    return _make(s, (x,), lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``.

    ``logits`` has shape ``(batch, 2)``; ``labels`` holds class indices 0/1.
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2 or logits.shape[1] != 2:
        raise ShapeError(f"expected (batch, 2) logits, got {logits.shape}")
    if labels.shape != (logits.shape[0],):
        raise ShapeError(f"{logits.shape[0]} logits rows but labels of shape {labels.shape}")
    if not np.all((labels == 0) | (labels == 1)):
        raise InvalidLabelError(f"labels must be 0 or 1, got {np.unique(labels).tolist()}")
    labels = labels.astype(np.intp)
    z = logits.data
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(len(labels))
    loss = np.mean(log_norm - shifted[rows, labels])
    batch = len(labels)

    def backward(g):
        probs = np.exp(shifted - log_norm[:, None])
        probs[rows, labels] -= 1.0
        return (probs * (g / batch),)

    return _make(np.asarray(loss), (logits,), backward)

