import numpy as np
import pytest

from roiranknet.autodiff import grad_check, softmax_cross_entropy
from roiranknet.data import SubjectRecord, Manifest
from roiranknet.models import ModelConfig, build_model, classify_forward

TINY = dict(conv_channels=(4, 5, 6, 6), hidden_size=5, fc_size=6, attention_size=4)


def tiny_config(variant="SCCNN_RNN", **kw):
    """A narrow network so protocol tests train in milliseconds."""
    return ModelConfig.for_variant(variant, **{**TINY, **kw})


def make_manifest(sites=("A", "B"), per_class=4, n_rois=6, length=24, seed=0, signal_roi=None):
    rng = np.random.default_rng(seed)
    records = []
    for site in sites:
        for label in ("ADHD", "HC"):
            for i in range(per_class):
                x = rng.standard_normal((n_rois, length))
                if signal_roi is not None and label == "ADHD":
                    x[signal_roi] += 3 * np.sin(np.arange(length) * 2.5)
                records.append(SubjectRecord.in_memory(f"{site}-{label}-{i}", site, label, x))
    return Manifest(records)


def end_to_end_check(variant, seed=0, max_probes=20):
    """grad_check of loss w.r.t. every parameter on a 2-subject, 4-ROI, T=24 batch.

    Normalization runs in eval mode with running statistics set to the batch
    statistics, which keeps the loss a smooth function of each parameter.
    """
    model = build_model(ModelConfig.for_variant(variant), seed)
    x = np.random.default_rng(seed).standard_normal((2, 4, 24))
    labels = np.array([1, 0])
    for state in model.bn.values():
        state.momentum = 0.0
    model.train()
    classify_forward(model, x)
    model.eval()

    def loss(*_):
        return softmax_cross_entropy(classify_forward(model, x), labels)

    return grad_check(loss, model.parameters(), max_probes=max_probes, full_output=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = {}


def record_criterion(name, passed, detail):
    ACCEPTANCE[name] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (passed, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
