"""The four separate-channel CNN-RNN classifiers.

Every variant applies one shared 1-D convolutional encoder to each ROI's time
series independently, so the number of trainable weights never depends on how
many ROIs (or how many time points) are fed in.  The ROI feature vectors are
then treated as a sequence and passed through a bidirectional LSTM that steps
across ROIs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..autodiff import (BatchNormState, Parameter, Tensor, as_tensor, batch_norm1d, bilstm,
                        conv1d, leaky_relu, linear, softmax, xavier_init)
from ..errors import ConfigError, InvalidSlicingError, SequenceTooShortError, ShapeError
from .config import ModelConfig


class Model:
    """Materialized parameters plus normalization state for one config."""

    def __init__(self, config: ModelConfig, seed: int | None = None):
        self.config = config
        self.seed = seed
        self.params: dict[str, Parameter] = {}
        self.bn: dict[str, BatchNormState] = {}
        self.training = True

    def add(self, name: str, data, decay_exempt: bool = False) -> Parameter:
        if name in self.params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        p = Parameter(data, name=name, decay_exempt=decay_exempt)
        self.params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self.params[name]

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def train(self) -> "Model":
        self.training = True
        return self

    def eval(self) -> "Model":
        self.training = False
        return self

    def __repr__(self) -> str:
        return f"Model({self.config.variant}, params={param_count(self)})"


def _xavier(rng, shape, fan_in, fan_out) -> np.ndarray:
    return xavier_init(shape, fan_in, fan_out, rng).data


def build_model(config: ModelConfig, rng: np.random.Generator | int | None = None) -> Model:
    """Create a model with Xavier-uniform weights, zero biases, unit BN scale.

    ``rng`` may be a generator or an integer seed.
    """
    config.validate()
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    model = Model(config, seed=None if seed is None else int(seed))
    k = config.kernel

    c_prev = 1
    for i, c in enumerate(config.conv_channels):
        model.add(f"enc.conv{i}.weight", _xavier(rng, (c, c_prev, k), c_prev * k, c * k))
        model.add(f"enc.conv{i}.bias", np.zeros(c), decay_exempt=True)
        model.add(f"enc.bn{i}.gamma", np.ones(c), decay_exempt=True)
        model.add(f"enc.bn{i}.beta", np.zeros(c), decay_exempt=True)
        model.bn[f"enc.bn{i}"] = BatchNormState.fresh(c)
        c_prev = c
    feat = c_prev
    if config.variant == "ASDRNN":
        model.add("enc.skip.weight", _xavier(rng, (feat, 1), 1, feat))

    H = config.hidden_size
    for direction in ("fwd", "bwd"):
        model.add(f"rnn.{direction}.w_ih", _xavier(rng, (4 * H, feat), feat, 4 * H))
        model.add(f"rnn.{direction}.w_hh", _xavier(rng, (4 * H, H), H, 4 * H))
        model.add(f"rnn.{direction}.bias", np.zeros(4 * H), decay_exempt=True)

    if config.has_attention:
        A = config.attention_size
        model.add("att.w", _xavier(rng, (A, 4 * H), 4 * H, A))
        model.add("att.b", np.zeros(A), decay_exempt=True)
        model.add("att.v", _xavier(rng, (A,), A, 1))

    model.add("fc.weight", _xavier(rng, (config.fc_size, 2 * H), 2 * H, config.fc_size))
    model.add("fc.bias", np.zeros(config.fc_size), decay_exempt=True)
    model.add("cls.weight", _xavier(rng, (config.n_classes, config.fc_size),
                                    config.fc_size, config.n_classes))
    model.add("cls.bias", np.zeros(config.n_classes), decay_exempt=True)
    return model


def param_count(model: Model) -> int:
    """Number of trainable scalars."""
    return int(sum(p.size for p in model.params.values()))


# -- encoders -----------------------------------------------------------------

def _as_signal_batch(roi_signal) -> tuple[Tensor, bool]:
    x = as_tensor(roi_signal)
    if x.ndim == 1:
        return x.reshape(1, 1, x.shape[0]), True
    if x.ndim == 2 and x.shape[0] == 1:
        return x.reshape(1, 1, x.shape[1]), True
    if x.ndim == 2:
        return x.reshape(x.shape[0], 1, x.shape[1]), False
    if x.ndim == 3 and x.shape[1] == 1:
        return x, False
    raise ShapeError(f"expected (T,), (1, T), (n, T) or (n, 1, T) signals, got {x.shape}")


def _encode(model: Model, roi_signal, dilation: int, skip: bool) -> Tensor:
    x, single = _as_signal_batch(roi_signal)
    n_layers = len(model.config.conv_channels)
    span = 1 + n_layers * (model.config.kernel - 1) * dilation
    if x.shape[-1] < span:
        raise SequenceTooShortError(
            f"time series of length {x.shape[-1]} is too short; the encoder needs >= {span}")
    h = x
    for i in range(n_layers):
        h = conv1d(h, model[f"enc.conv{i}.weight"], model[f"enc.conv{i}.bias"], dilation)
        h = batch_norm1d(h, model[f"enc.bn{i}.gamma"], model[f"enc.bn{i}.beta"],
                         model.bn[f"enc.bn{i}"], model.training)
        if skip and i == n_layers - 1:
            # centre-crop the raw input to the surviving window, project 1 -> C channels
            offset = (x.shape[-1] - h.shape[-1]) // 2
            cropped = x[:, :, offset:offset + h.shape[-1]]
            h = h + model["enc.skip.weight"] @ cropped
        h = leaky_relu(h)
    pooled = h.mean(axis=-1)
    return pooled[0] if single else pooled


def sccnn_encode(roi_signal, model: Model) -> Tensor:
    """Shared CNN feature extractor: ``(1, T)`` -> ``(C,)``, or ``(n, T)`` -> ``(n, C)``.

    Four conv -> batch-norm -> leaky-ReLU blocks followed by global average
    pooling over time.
    """
    return _encode(model, roi_signal, dilation=1, skip=False)


def sdcnn_encode(roi_signal, model: Model) -> Tensor:
    """Dilated variant of :func:`sccnn_encode` with a skip connection.

    The raw input, centre-cropped and linearly projected to the feature
    width, is added after the last normalization and before the final
    activation.
    """
    if "enc.skip.weight" not in model.params:
        raise ConfigError("sdcnn_encode needs a model built with the ASDRNN variant")
    return _encode(model, roi_signal, dilation=model.config.encoder_dilation, skip=True)


# -- sequence stages ------------------------------------------------------------

def _rnn_params(model: Model, direction: str):
    return (model[f"rnn.{direction}.w_ih"], model[f"rnn.{direction}.w_hh"],
            model[f"rnn.{direction}.bias"])


def roi_sequence_encode(features, model: Model) -> Tensor:
    """BiLSTM across the ROI axis: ``([B,] N_R, C)`` -> ``([B,] N_R, 2H)``."""
    features = as_tensor(features)
    if features.ndim not in (2, 3) or features.shape[-2] < 1:
        raise ShapeError(f"expected ([B,] N_R, C) features, got {features.shape}")
    return bilstm(features, _rnn_params(model, "fwd"), _rnn_params(model, "bwd"))


@dataclass
class AttentionWeights:
    """Row-stochastic pairwise weights ``alpha[..., i, j]``."""

    alpha: Tensor

    def row_sums(self) -> np.ndarray:
        return self.alpha.data.sum(axis=-1)


def attentive_attention(h, model: Model) -> tuple[Tensor, AttentionWeights]:
    """Pairwise additive attention over hidden states.

    ``score(i, j) = v . tanh(W [h_i; h_j] + b)``, ``alpha_i = softmax_j
    score(i, j)`` and ``c_i = sum_j alpha_ij h_j``.  Accepts ``(N, D)`` or
    ``(B, N, D)`` input and returns contexts of the same shape.
    """
    h = as_tensor(h)
    single = h.ndim == 2
    if single:
        h = h.reshape(1, *h.shape)
    B, N, D = h.shape
    w = model["att.w"]
    if w.shape[1] != 2 * D:
        raise ShapeError(f"attention expects {w.shape[1] // 2}-dim states, got {D}")
    A = w.shape[0]
    left = h @ w[:, :D].T
    right = h @ w[:, D:].T
    pre = left.reshape(B, N, 1, A) + right.reshape(B, 1, N, A) + model["att.b"]
    scores = pre.tanh() @ model["att.v"]
    alpha = softmax(scores, axis=-1)
    context = alpha @ h
    if single:
        return context[0], AttentionWeights(alpha[0])
    return context, AttentionWeights(alpha)


def slice_bounds(n_rois: int, length: int, stride: int) -> list[tuple[int, int]]:
    """Half-open 0-based ROI windows of the slicing scheme.

    Window ``s`` starts at ``s * stride`` for ``s < ceil((n_rois - length) /
    stride)``; one final window always covers the last ``length`` ROIs.
    """
    if not (1 <= stride <= length <= n_rois):
        raise InvalidSlicingError(
            f"slicing requires 1 <= stride <= length <= n_rois, got "
            f"stride={stride}, length={length}, n_rois={n_rois}")
    n_regular = math.ceil((n_rois - length) / stride)
    bounds = [(s * stride, s * stride + length) for s in range(n_regular)]
    bounds.append((n_rois - length, n_rois))
    return bounds


def slice_sequence(features, l: int, w: int) -> list[Tensor]:
    """Split ``([B,] N_R, C)`` features into overlapping ROI windows."""
    features = as_tensor(features)
    n_rois = features.shape[-2]
    return [features[..., start:stop, :] for start, stop in slice_bounds(n_rois, l, w)]


def effective_slicing(config: ModelConfig, n_rois: int) -> tuple[int, int]:
    """Window length and stride actually used for ``n_rois`` inputs.

    Subsets smaller than the configured window collapse to a single window.
    """
    length = min(config.slice_length, n_rois)
    return length, min(config.slice_stride, length)


def _sliced_states(model: Model, features: Tensor) -> Tensor:
    B, N, C = features.shape
    length, stride = effective_slicing(model.config, N)
    bounds = slice_bounds(N, length, stride)
    index = np.array([np.arange(a, b) for a, b in bounds])
    segments = features[:, index]
    S = len(bounds)
    states = roi_sequence_encode(segments.reshape(B * S, length, C), model)
    last = states[:, -1]
    return last.reshape(B, S, last.shape[-1])


# -- full forward pass ----------------------------------------------------------

def roi_features(model: Model, batch: Tensor) -> Tensor:
    """Encode every ROI of ``(B, N_R, T)`` input: returns ``(B, N_R, C)``."""
    B, N, T = batch.shape
    flat = batch.reshape(B * N, 1, T)
    if model.config.variant == "ASDRNN":
        feats = sdcnn_encode(flat, model)
    else:
        feats = sccnn_encode(flat, model)
    return feats.reshape(B, N, feats.shape[-1])


def classify_forward(model: Model, batch) -> Tensor:
    """Logits of shape ``(B, 2)`` for input of shape ``(B, N_R, T)``."""
    batch = as_tensor(batch)
    if batch.ndim != 3:
        raise ShapeError(f"expected (batch, n_rois, time) input, got {batch.shape}")
    if min(batch.shape) < 1:
        raise ShapeError(f"empty input of shape {batch.shape}")
    features = roi_features(model, batch)
    variant = model.config.variant

    if variant == "SCCNN_RNN":
        summary = roi_sequence_encode(features, model)[:, -1]
    else:
        if variant == "ASSRNN":
            states = _sliced_states(model, features)
        else:
            states = roi_sequence_encode(features, model)
        context, _ = attentive_attention(states, model)
        summary = context.mean(axis=1)

    hidden = leaky_relu(linear(summary, model["fc.weight"], model["fc.bias"]))
    return linear(hidden, model["cls.weight"], model["cls.bias"])


def predict_proba(model: Model, batch) -> np.ndarray:
    logits = classify_forward(model, batch).data
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)
