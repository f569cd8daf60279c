"""Check the hand-written backward passes against finite differences.

Run with ``python demos/gradient_check.py``.  Every layer is checked on a
small random input, then the loss of each full classifier is differentiated
with respect to all of its parameters.  Each line reports the largest relative
error between the analytic and numeric gradient; values below 1e-4 mean the
backward pass is correct to the precision a central difference can resolve.
"""
import time

import numpy as np

from roiranknet.autodiff import (BatchNormState, Tensor, batch_norm1d, bilstm, conv1d, grad_check,
                                 leaky_relu, linear, lstm, softmax, softmax_cross_entropy)
from roiranknet.models import VARIANTS, ModelConfig, build_model, classify_forward

rng = np.random.default_rng(0)


def leaf(shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def lstm_params(n_in, n_hidden):
    return [leaf((4 * n_hidden, n_in)), leaf((4 * n_hidden, n_hidden)), leaf(4 * n_hidden)]


def layer_checks():
    x3 = leaf((2, 3, 12))
    w, b = leaf((4, 3, 3)), leaf(4)
    yield "conv1d", grad_check(lambda x, w, b: conv1d(x, w, b), [x3, w, b])
    yield "conv1d dilation 2", grad_check(lambda x, w, b: conv1d(x, w, b, 2), [x3, w, b])

    g, beta = leaf(3), leaf(3)
    stats = BatchNormState.fresh(3)
    bn = lambda x, g, b: batch_norm1d(x, g, b, BatchNormState.fresh(3), True)
    yield "batch norm (train)", grad_check(bn, [x3, g, beta])
    yield "batch norm (eval)", grad_check(lambda x, g, b: batch_norm1d(x, g, b, stats, False),
                                          [x3, g, beta])

    yield "leaky ReLU", grad_check(leaky_relu, [leaf(20)])
    yield "linear", grad_check(linear, [leaf((5, 3)), leaf((4, 3)), leaf(4)])
    yield "softmax", grad_check(lambda x: softmax(x), [leaf((3, 4))])
    labels = np.array([0, 1, 1])
    yield "cross-entropy", grad_check(lambda z: softmax_cross_entropy(z, labels), [leaf((3, 2))])
    yield "LSTM", grad_check(lstm, [leaf((2, 4, 3)), *lstm_params(3, 3)])
    f, r = lstm_params(3, 2), lstm_params(3, 2)
    yield "BiLSTM", grad_check(lambda x, *p: bilstm(x, p[:3], p[3:]), [leaf((4, 3)), *f, *r])


def model_check(variant):
    model = build_model(ModelConfig.for_variant(variant), 0)
    x = rng.standard_normal((2, 4, 24))
    labels = np.array([1, 0])
    # freeze batch statistics so the loss is a smooth function of the weights
    for state in model.bn.values():
        state.momentum = 0.0
    model.train()
    classify_forward(model, x)
    model.eval()
    loss = lambda *_: softmax_cross_entropy(classify_forward(model, x), labels)
    return grad_check(loss, model.parameters(), max_probes=20)


if __name__ == "__main__":
    start = time.perf_counter()
    for name, err in layer_checks():
        print(f"{name:<22} {err:.2e}")
    for variant in VARIANTS:
        print(f"{variant + ' (all params)':<22} {model_check(variant):.2e}")
    print(f"done in {time.perf_counter() - start:.1f} s")
