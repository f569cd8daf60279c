"""Training and evaluation of a single model on a fixed ROI subset."""
from __future__ import annotations

from collections import defaultdict
from typing import Sequence

import numpy as np

from ..autodiff import AdamState, adam_step, softmax_cross_entropy
from ..data import balanced_batches
from ..errors import ClassAbsentError, ConfigError, EvaluationError
from ..models import Model, classify_forward
from .config import TrainConfig

EVAL_CHUNK = 64


def check_roi_subset(roi_subset: Sequence[int], n_rois: int) -> list[int]:
    subset = [int(r) for r in roi_subset]
    if not subset:
        raise ConfigError("roi_subset must not be empty")
    if len(set(subset)) != len(subset):
        raise ConfigError(f"roi_subset has repeated ROIs: {subset}")
    bad = [r for r in subset if not 0 <= r < n_rois]
    if bad:
        raise ConfigError(f"ROI indices {bad} outside the atlas range [0, {n_rois - 1}]")
    return subset


def standardize_series(x: np.ndarray) -> np.ndarray:
    """Z-score every ROI series over time; constant series map to zeros."""
    mean = x.mean(axis=-1, keepdims=True)
    std = x.std(axis=-1, keepdims=True)
    return np.divide(x - mean, std, out=np.zeros_like(x), where=std > 0)


def stack_inputs(records: Sequence, roi_subset: Sequence[int], length: int | None = None,
                 standardize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """``(B, k, T)`` inputs and ``(B,)`` targets; series are cut to a common length.

    ``length`` defaults to the shortest series among ``records``; the leading
    time points are kept.
    """
    if length is None:
        length = min(r.length for r in records)
    index = np.asarray(roi_subset, dtype=int)
    x = np.stack([r.series[index, :length] for r in records])
    if standardize:
        x = standardize_series(x)
    y = np.array([r.target for r in records], dtype=int)
    return x, y


def train(model: Model, train_records: Sequence, roi_subset: Sequence[int], config: TrainConfig,
          rng: np.random.Generator | int | None = None) -> tuple[Model, list[float]]:
    """Fit ``model`` in place with Adam + L2 on class-balanced mini-batches.

    Batches come from :func:`~roiranknet.data.balanced_batches` driven by
    ``rng`` (``config.seed`` when None).  Returns the model and the per-batch
    training loss.
    """
    if not train_records:
        raise ClassAbsentError("training pool is empty")
    subset = check_roi_subset(roi_subset, train_records[0].n_rois)
    rng = np.random.default_rng(config.seed if rng is None else rng)
    params = model.parameters()
    state = AdamState.for_parameters(params, learning_rate=config.learning_rate)
    trace: list[float] = []
    model.train()
    for _ in range(config.epochs):
        for batch in balanced_batches(train_records, config.batch_size, rng):
            x, y = stack_inputs(batch, subset, standardize=config.standardize)
            loss = softmax_cross_entropy(classify_forward(model, x), y)
            model.zero_grad()
            loss.backward()
            adam_step(state, params, config.l2_factor)
            trace.append(loss.item())
    model.eval()
    return model, trace


def predict(model: Model, records: Sequence, roi_subset: Sequence[int],
            standardize: bool = True) -> np.ndarray:
    """Arg-max class per record in eval mode.

    Records are grouped by series length and run in chunks; eval-mode
    normalization makes every prediction independent of its neighbours.
    """
    subset = check_roi_subset(roi_subset, records[0].n_rois)
    model.eval()
    by_length = defaultdict(list)
    for i, r in enumerate(records):
        by_length[r.length].append(i)
    out = np.empty(len(records), dtype=int)
    for length in sorted(by_length):
        idx = by_length[length]
        for start in range(0, len(idx), EVAL_CHUNK):
            chunk = idx[start:start + EVAL_CHUNK]
            x, _ = stack_inputs([records[i] for i in chunk], subset, length, standardize)
            logits = classify_forward(model, x).data
            out[chunk] = logits.argmax(axis=1)
    return out


def evaluate_fold(model: Model, test_records: Sequence, roi_subset: Sequence[int],
                  standardize: bool = True) -> float:
    """Fraction of ``test_records`` whose arg-max logit matches the label."""
    if not test_records:
        raise EvaluationError("cannot evaluate on an empty test set")
    pred = predict(model, test_records, roi_subset, standardize)
    truth = np.array([r.target for r in test_records])
    return float(np.mean(pred == truth))
