"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the "acceptance
criteria" section at the end of the pytest run.  The protocol criteria run at
desk scale: 3 synthetic sites of 40 subjects per class, T = 32, 10 training
epochs, and a 29-ROI reduced atlas that contains the planted ROIs.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from conftest import end_to_end_check, record_criterion
from roiranknet.autodiff import (BatchNormState, Tensor, batch_norm1d, bilstm, conv1d, grad_check,
                                 leaky_relu, linear, lstm, softmax, softmax_cross_entropy)
from roiranknet.data import (Manifest, SubjectRecord, SyntheticSpec, balanced_batches,
                             gen_synthetic, loso_split)
from roiranknet.experiment import (ComparisonResult, TrainConfig, export_report, load_result,
                                   loso_accuracy, parse_plotdata, predict, rank_single_roi,
                                   reduced_atlas, save_result, topk_sweep, train)
from roiranknet.models import (VARIANTS, ModelConfig, attentive_attention, build_model,
                               classify_forward, param_count, sdcnn_encode, slice_sequence)

PLANTED = (5, 40, 99)
SEEDS = (0, 1, 2)
ATLAS = 29
DESK = dict(T=32, epochs=10)


def planted_set(seed, effect=1.0):
    return gen_synthetic(SyntheticSpec(n_sites=3, subjects_per_site_per_class=40, T=DESK["T"],
                                       planted_rois=PLANTED, effect_strength=effect, seed=seed))


def desk_config(seed):
    return TrainConfig(epochs=DESK["epochs"], seed=seed)


@pytest.fixture(scope="module")
def rois():
    return reduced_atlas(ATLAS, 116, anchors=PLANTED)


@pytest.fixture(scope="module")
def planted(rois):
    """Per seed: manifest, ranking and wall time of the ranking."""
    out = {}
    for seed in SEEDS:
        manifest = planted_set(seed)
        start = time.perf_counter()
        ranking = rank_single_roi(manifest, desk_config(seed), rois)
        out[seed] = (manifest, ranking, time.perf_counter() - start)
    return out


# -- 1 -------------------------------------------------------------------------

def _leaf(rng, shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def _layer_checks(rng):
    x = _leaf(rng, (2, 3, 12))
    w, b = _leaf(rng, (4, 3, 3)), _leaf(rng, 4)
    g, beta = _leaf(rng, 3), _leaf(rng, 3)
    stats_ = BatchNormState(rng.standard_normal(3), rng.uniform(0.5, 2, 3))
    lstm_p = lambda: [_leaf(rng, (8, 3)), _leaf(rng, (8, 2)), _leaf(rng, 8)]
    f, r = lstm_p(), lstm_p()
    labels = np.array([0, 1, 1])
    ascrnn = build_model(ModelConfig.for_variant("ASCRNN", attention_size=8), 0)
    asdrnn = build_model(ModelConfig.for_variant("ASDRNN"), 0).eval()
    h = _leaf(rng, (2, 3, 256))
    feats = _leaf(rng, (2, 9, 4))
    return {
        "conv1d": lambda: grad_check(lambda x, w, b: conv1d(x, w, b), [x, w, b]),
        "dilated conv1d": lambda: grad_check(lambda x, w, b: conv1d(x, w, b, 2), [x, w, b]),
        "batch norm (train)": lambda: grad_check(
            lambda x, g, b: batch_norm1d(x, g, b, BatchNormState.fresh(3), True), [x, g, beta]),
        "batch norm (eval)": lambda: grad_check(
            lambda x, g, b: batch_norm1d(x, g, b, stats_, False), [x, g, beta]),
        "leaky ReLU": lambda: grad_check(leaky_relu, [_leaf(rng, 30)]),
        "linear": lambda: grad_check(linear, [_leaf(rng, (5, 3)), _leaf(rng, (4, 3)), _leaf(rng, 4)]),
        "softmax": lambda: grad_check(lambda z: softmax(z), [_leaf(rng, (3, 4))]),
        "cross-entropy": lambda: grad_check(lambda z: softmax_cross_entropy(z, labels),
                                            [_leaf(rng, (3, 2))]),
        "LSTM": lambda: grad_check(lstm, [_leaf(rng, (2, 4, 3)), *lstm_p()]),
        "BiLSTM": lambda: grad_check(lambda s, *p: bilstm(s, p[:3], p[3:]),
                                     [_leaf(rng, (4, 3)), *f, *r]),
        "attention": lambda: grad_check(lambda h, *p: attentive_attention(h, ascrnn)[0],
                                        [h, ascrnn["att.w"], ascrnn["att.b"], ascrnn["att.v"]]),
        "dilated encoder + skip": lambda: grad_check(
            lambda s, p, c: sdcnn_encode(s, asdrnn),
            [_leaf(rng, (2, 1, 24)), asdrnn["enc.skip.weight"], asdrnn["enc.conv0.weight"]]),
        "ROI slicing": lambda: grad_check(lambda s: sum(t.sum() * (i + 1) for i, t in
                                                        enumerate(slice_sequence(s, 4, 3))),
                                          [feats]),
    }


def test_gradient_correctness():
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    errors = {name: float(check()) for name, check in _layer_checks(rng).items()}
    unresolved = 0
    for variant in VARIANTS:
        res = end_to_end_check(variant, max_probes=20)
        errors[f"{variant} end-to-end"] = res.max_rel_error
        unresolved += res.unresolved
    elapsed = time.perf_counter() - start
    worst = max(errors, key=errors.get)
    ok = errors[worst] < 1e-4 and elapsed < 120
    record_criterion("gradient correctness", ok,
                     f"{len(errors)} checks, worst {errors[worst]:.1e} ({worst}), "
                     f"{unresolved} sub-resolution components, {elapsed:.0f} s (< 1e-4, < 120 s)")
    assert ok, errors


# -- 2 -------------------------------------------------------------------------

def test_capacity_invariance():
    start = time.perf_counter()
    counts = {}
    for variant in VARIANTS:
        model = build_model(ModelConfig.for_variant(variant), 0)
        for n_rois in (1, 13, 15, 116):
            logits = classify_forward(model, np.zeros((1, n_rois, 24)))
            assert logits.shape == (1, 2)
            counts[variant, n_rois] = param_count(model)
    elapsed = time.perf_counter() - start
    per_variant = {v: {counts[v, n] for n in (1, 13, 15, 116)} for v in VARIANTS}
    ok = all(len(s) == 1 for s in per_variant.values())
    record_criterion("capacity invariance", ok,
                     ", ".join(f"{v} {sorted(s)}" for v, s in per_variant.items())
                     + f" ({elapsed:.1f} s incl. forward passes)")
    assert ok


# -- 3 -------------------------------------------------------------------------

def test_slicing_oracle():
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    cases = mismatches = 0
    for n in range(1, 25):
        f = rng.standard_normal((n, 3))
        for l in range(1, n + 1):
            for w in range(1, l + 1):
                cases += 1
                n_seg = math.ceil((n - l) / w) + 1
                # 1-based ROI ranges straight from the definition
                expect = [range(1 + s * w, l + s * w + 1) for s in range(n_seg - 1)]
                expect.append(range(n - l + 1, n + 1))
                got = slice_sequence(f, l, w)
                if len(got) != n_seg or any(
                        not np.array_equal(seg.data, f[[i - 1 for i in rows]])
                        for seg, rows in zip(got, expect)):
                    mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10
    record_criterion("slicing oracle", ok,
                     f"{cases} (N_R, l, w) triples, {mismatches} mismatches, {elapsed:.1f} s")
    assert ok


# -- 4 -------------------------------------------------------------------------

def test_attention_contract():
    rng = np.random.default_rng(0)
    model = build_model(ModelConfig.for_variant("ASCRNN"), 0)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 30))
        h = rng.standard_normal((int(rng.integers(1, 4)), n, 256)) * rng.uniform(0.1, 5)
        _, weights = attentive_attention(h, model)
        worst = max(worst, float(np.abs(weights.row_sums() - 1).max()))
    h1 = rng.standard_normal((1, 256))
    c1, _ = attentive_attention(h1, model)
    exact = np.array_equal(c1.data, h1)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and exact and elapsed < 10
    record_criterion("attention contract", ok,
                     f"max |row sum - 1| = {worst:.1e} over 100 inputs, N_R=1 exact: {exact}, "
                     f"{elapsed:.1f} s")
    assert ok


# -- 5 -------------------------------------------------------------------------

def test_overfit_sanity():
    rng = np.random.default_rng(0)
    records = [SubjectRecord.in_memory(f"toy{i}", "A", ("ADHD", "HC")[i % 2],
                                       rng.standard_normal((4, 32))) for i in range(8)]
    labels = np.array([1 if r.label == "ADHD" else 0 for r in records])
    start = time.perf_counter()
    model, trace = train(build_model(ModelConfig(), 0), records, range(4),
                         TrainConfig(epochs=200, batch_size=8))
    acc = float((predict(model, records, range(4)) == labels).mean())
    elapsed = time.perf_counter() - start
    ok = acc == 1.0 and elapsed < 300
    record_criterion("overfit sanity", ok,
                     f"train accuracy {acc:.3f} after 200 epochs, final loss {trace[-1]:.1e}, "
                     f"{elapsed:.0f} s")
    assert ok


# -- 6 -------------------------------------------------------------------------

def test_planted_recovery(planted):
    hits = {}
    for seed, (_, ranking, _) in planted.items():
        hits[seed] = set(PLANTED) <= set(ranking.rank_order[:10])
    elapsed = sum(t for *_, t in planted.values())
    ok = sum(hits.values()) >= 2 and elapsed < 1800
    detail = "; ".join(f"seed {s}: planted ranks "
                       f"{[planted[s][1].rank_order.index(r) + 1 for r in PLANTED]}"
                       for s in SEEDS)
    record_criterion("planted-ROI recovery", ok,
                     f"{detail}; all in top 10 for {sum(hits.values())}/3 seeds, {elapsed:.0f} s")
    assert ok


# -- 7 -------------------------------------------------------------------------

def test_sweep_separation(planted):
    start = time.perf_counter()
    gaps = []
    for seed, (manifest, ranking, _) in planted.items():
        top = topk_sweep(manifest, ranking, 3, desk_config(seed), "top")
        rev = topk_sweep(manifest, ranking, 3, desk_config(seed), "reverse")
        gaps.append(top.accuracies[2] - rev.accuracies[2])
    elapsed = time.perf_counter() - start
    gap = float(np.mean(gaps))
    ok = gap >= 0.10 and elapsed < 1200
    record_criterion("sweep separation", ok,
                     f"top-3 minus reverse-3 accuracy {gap * 100:.1f} points "
                     f"(per seed {[round(g * 100, 1) for g in gaps]}), {elapsed:.0f} s")
    assert ok


# -- 8 -------------------------------------------------------------------------

def test_null_calibration(rois):
    manifest = planted_set(0, effect=0.0)
    start = time.perf_counter()
    ranking = rank_single_roi(manifest, desk_config(0), rois)
    elapsed = time.perf_counter() - start
    sizes = set(ranking.reports[rois[0]].test_sizes.values())
    # equal fold sizes make the mean of site accuracies a pooled binomial proportion
    assert len(sizes) == 1
    n = sizes.pop() * len(manifest.sites)
    lo, hi = (k / n for k in stats.binom.interval(0.99, n, 0.5))
    accs = ranking.per_roi_accuracy
    outside = [r for r in rois if not lo <= accs[r] <= hi]
    ok = not outside and elapsed < 1800
    record_criterion("null calibration", ok,
                     f"per-ROI accuracy range [{min(accs.values()):.3f}, {max(accs.values()):.3f}], "
                     f"band [{lo:.3f}, {hi:.3f}] for n={n}, outside: {outside}, {elapsed:.0f} s")
    assert ok


# -- 9 -------------------------------------------------------------------------

def _report_round_trips(tmp_path, rng):
    from roiranknet.experiment import EvalReport, RankingResult, SweepResult, rank_order_of
    cfg = TrainConfig().to_dict()
    rep = lambda subset: EvalReport({"NYU": float(rng.random()), "KKI": float(rng.random())},
                                    list(subset), cfg, [0], [], {"NYU": 3, "KKI": 7})
    reports = {r: rep([r]) for r in range(116)}
    acc = {r: v.mean_accuracy for r, v in reports.items()}
    ranking = RankingResult(acc, rank_order_of(acc), reports, 116)
    sweep = SweepResult([(k, rep(range(k))) for k in range(1, 21)], "top", list(range(20)))
    comparison = ComparisonResult([("ASCRNN", sweep), ("ASSRNN", sweep)])
    ok = True
    for i, result in enumerate([ranking, sweep, comparison, rep([1, 2])]):
        plot = parse_plotdata(export_report(result, tmp_path / f"r{i}.csv", "plotdata"))
        if isinstance(result, RankingResult):
            ok &= plot.x == list(range(116)) and plot.y[0] == [acc[r] for r in range(116)]
        elif isinstance(result, SweepResult):
            ok &= plot.x == list(range(1, 21)) and plot.y[0] == result.accuracies
        loaded = load_result(save_result(result, tmp_path / f"r{i}.json"))
        ok &= loaded.to_dict() == result.to_dict()
    return ok


def test_protocol_bookkeeping(tmp_path):
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    partitions = 0
    for _ in range(200):
        n = int(rng.integers(2, 60))
        labels = rng.integers(0, int(rng.integers(2, 7)), n)
        labels[:2] = [0, 1]
        m = Manifest([SubjectRecord.in_memory(f"s{i}", f"site{s}", "HC", np.zeros((1, 20)))
                      for i, s in enumerate(labels)])
        tests = [[r.subject_id for r in f.split(m)[1]] for f in loso_split(m)]
        flat = sorted(sum(tests, []))
        partitions += flat == sorted(r.subject_id for r in m.records) and len(tests) == len(set(labels))

    records = [SubjectRecord.in_memory(f"s{i}", "A", ("ADHD", "HC")[i < 300], np.zeros((1, 20)))
               for i in range(481)]
    batches = list(balanced_batches(records, 32, rng))
    balanced = all(sum(r.label == "ADHD" for r in b) == 16 and len(b) == 32 for b in batches)

    lossless = _report_round_trips(tmp_path, rng)
    elapsed = time.perf_counter() - start
    ok = partitions == 200 and balanced and lossless and elapsed < 60
    record_criterion("protocol bookkeeping",
                     ok, f"{partitions}/200 LOSO partitions, {len(batches)} batches all 16/16: "
                     f"{balanced}, report round trips lossless: {lossless}, {elapsed:.1f} s")
    assert ok


# -- 10 ------------------------------------------------------------------------

def _cli(*args):
    proc = subprocess.run([sys.executable, "-m", "roiranknet.cli", *map(str, args)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_determinism(tmp_path):
    start = time.perf_counter()
    fast = ["--set", "epochs=2", "--seed", "11"]

    def run_all(tag, jobs):
        root = tmp_path / tag
        data = root / "data"
        _cli("gen-synthetic", "--sites", "3", "--per-class", "4", "--time-len", "32",
             "--seed", "11", "--out-dir", data)
        _cli("validate", data)
        _cli("train", data, "--include-rois", "5,40", "--save-model", "--jobs", jobs, *fast,
             "--out-dir", root / "train")
        _cli("rank-roi", data, "--atlas-size", "4", "--include-rois", "5,40", "--jobs", jobs,
             *fast, "--out-dir", root / "rank")
        ranking = root / "rank" / "ranking.json"
        for direction in ("top", "reverse"):
            _cli("sweep", data, "--ranking", ranking, "--direction", direction, "--k-max", "2",
                 "--jobs", jobs, *fast, "--out-dir", root / "sweep")
        _cli("compare", data, "--ranking", ranking, "--k-max", "2", "--jobs", jobs, *fast,
             "--out-dir", root / "compare")
        _cli("report", root / "compare" / "comparison.json", "--format", "plotdata",
             "--output", root / "report.csv")
        return _tree(root)

    a, b, c = run_all("a", 1), run_all("b", 1), run_all("c", 8)
    elapsed = time.perf_counter() - start
    identical = a == b == c
    ok = identical and elapsed < 600
    record_criterion("determinism", ok,
                     f"{len(a)} files from every subcommand byte-identical across 2 runs at "
                     f"--jobs 1 and 1 run at --jobs 8: {identical}, {elapsed:.0f} s")
    assert ok, sorted(k for k in a if a.get(k) != c.get(k))
