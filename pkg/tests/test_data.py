"""Dataset model: file formats, validation, synthetic generator, LOSO, batching."""
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import make_manifest
from roiranknet.data import (Manifest, SubjectRecord, SyntheticSpec, balanced_batches,
                             gen_synthetic, load_manifest, loso_split, read_series,
                             save_manifest, validate_dataset, write_series)
from roiranknet.errors import (ClassAbsentError, ConfigError, DataLoadError, EmptyDatasetError,
                               SplitError, ValidationError)

TABLE1 = {   # site: (ADHD, HC)
    "NYU": (147, 110), "Peking": (101, 143), "OHSU": (43, 70), "KKI": (25, 69), "NI": (36, 37),
}


def counts_manifest(table, n_rois=2, length=20):
    recs = []
    for site, (n_adhd, n_hc) in table.items():
        for label, n in (("ADHD", n_adhd), ("HC", n_hc)):
            for i in range(n):
                recs.append(SubjectRecord.in_memory(f"{site}{label}{i}", site, label,
                                                    np.zeros((n_rois, length))))
    return Manifest(recs)


@pytest.fixture
def small_set(tmp_path):
    m = make_manifest(per_class=2, n_rois=3, length=20)
    save_manifest(m, tmp_path)
    return m, tmp_path


class TestSeriesFiles:
    def test_round_trip_exact(self, tmp_path, rng):
        x = rng.standard_normal((4, 7)) * 1e3
        write_series(tmp_path / "s.txt", x)
        assert np.array_equal(read_series(tmp_path / "s.txt"), x)

    @pytest.mark.parametrize("text", [
        "2 3\n1 2 3\n4 5\n",        # ragged
        "2 3\n1 2 3\n",             # missing row
        "two 3\n1 2 3\n4 5 6\n",    # bad header
        "1 2\n1 x\n",               # not a number
        "",
    ])
    def test_rejects_malformed(self, tmp_path, text):
        (tmp_path / "s.txt").write_text(text)
        with pytest.raises(DataLoadError):
            read_series(tmp_path / "s.txt")


class TestManifest:
    def test_round_trip(self, small_set):
        m, root = small_set
        loaded = load_manifest(root)
        assert loaded.same_as(m)
        again = root / "again"
        save_manifest(loaded, again)
        assert load_manifest(again / "manifest.csv").same_as(m)

    def test_lazy(self, small_set):
        _, root = small_set
        m = load_manifest(root, lazy=True)
        assert all(r._series is None for r in m.records)
        assert m.records[0].series.shape == (3, 20)

    def test_sites_and_counts(self):
        m = counts_manifest(TABLE1)
        assert len(m) == 781
        assert m.sites == list(TABLE1)
        assert m.class_counts["NYU"] == {"ADHD": 147, "HC": 110}
        assert {s: sum(c.values()) for s, c in m.class_counts.items()} == {
            "NYU": 257, "Peking": 244, "OHSU": 113, "KKI": 94, "NI": 73}
        assert sum(a for a, _ in TABLE1.values()) == 352

    def test_empty(self, tmp_path):
        (tmp_path / "manifest.csv").write_text("subject_id,site,label,relative_series_path\n")
        with pytest.raises(EmptyDatasetError):
            load_manifest(tmp_path)

    def test_missing(self, tmp_path):
        with pytest.raises(DataLoadError):
            load_manifest(tmp_path / "nope.csv")

    def test_missing_series(self, small_set):
        _, root = small_set
        (root / "series" / "A-ADHD-0.txt").unlink()
        with pytest.raises(DataLoadError):
            load_manifest(root)

    def test_duplicate_id(self, small_set):
        _, root = small_set
        path = root / "manifest.csv"
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines + [lines[1]]) + "\n")
        with pytest.raises(DataLoadError, match="duplicate"):
            load_manifest(root)

    def test_bad_label(self, small_set):
        _, root = small_set
        path = root / "manifest.csv"
        path.write_text(path.read_text().replace(",ADHD,", ",TD,", 1))
        with pytest.raises(DataLoadError):
            load_manifest(root)

    def test_nan_names_subject_and_roi(self, small_set):
        _, root = small_set
        x = read_series(root / "series" / "B-HC-1.txt")
        x[2, 5] = np.nan
        write_series(root / "series" / "B-HC-1.txt", x)
        with pytest.raises(ValidationError) as err:
            load_manifest(root)
        assert err.value.subject_id == "B-HC-1" and err.value.roi == 2
        assert "B-HC-1" in str(err.value) and "ROI 2" in str(err.value)


class TestValidation:
    def test_clean(self):
        report = validate_dataset(gen_synthetic(SyntheticSpec(n_sites=2, subjects_per_site_per_class=3)))
        assert report.ok and report.violations == []

    def test_class_absent_warning(self):
        m = counts_manifest({"A": (3, 3), "B": (0, 4)})
        report = validate_dataset(m)
        assert report.ok
        assert report.codes() == ["class-absent"]
        assert report.warnings[0].site == "B"

    def test_mixed_roi_count(self):
        recs = [SubjectRecord.in_memory("a", "S", "ADHD", np.zeros((116, 20))),
                SubjectRecord.in_memory("b", "S", "HC", np.zeros((90, 20)))]
        report = validate_dataset(Manifest(recs))
        assert not report.ok and "mixed-roi-count" in report.codes()

    def test_lists_every_violation(self):
        bad = np.zeros((3, 10))
        bad[1, 0] = np.inf
        recs = [SubjectRecord.in_memory("a", "S", "ADHD", bad),
                SubjectRecord.in_memory("b", "S", "HC", np.zeros((3, 30)))]
        codes = validate_dataset(Manifest(recs)).codes()
        assert Counter(codes) == Counter(["non-finite", "too-short"])


class TestSynthetic:
    def test_shape_and_ids(self):
        m = gen_synthetic(SyntheticSpec(n_sites=3, subjects_per_site_per_class=20, T=40))
        assert len(m) == 120 and m.sites == ["NYU", "Peking", "OHSU"]
        assert all(r.series.shape == (116, 40) for r in m.records)
        assert all(np.isfinite(r.series).all() for r in m.records)

    def test_deterministic(self):
        spec = SyntheticSpec(n_sites=2, subjects_per_site_per_class=3, seed=11)
        assert gen_synthetic(spec).same_as(gen_synthetic(spec))
        other = gen_synthetic(SyntheticSpec(n_sites=2, subjects_per_site_per_class=3, seed=12))
        assert not gen_synthetic(spec).same_as(other)

    @pytest.mark.parametrize("kw", [dict(planted_rois=(116,)), dict(effect_strength=-1),
                                    dict(n_sites=0)])
    def test_invalid_spec(self, kw):
        with pytest.raises(ConfigError):
            SyntheticSpec(**kw)

    def test_power_test_flags_planted(self):
        m = gen_synthetic(SyntheticSpec(seed=3))
        power = np.array([r.series.var(axis=1) for r in m.records])
        adhd = np.array([r.label == "ADHD" for r in m.records])
        # compare within-site power ratios so site gain cancels
        for site in m.sites:
            idx = np.array([r.site == site for r in m.records])
            power[idx] /= power[idx].mean(axis=0)
        p = stats.ttest_ind(power[adhd], power[~adhd], equal_var=False).pvalue
        assert sorted(np.flatnonzero(p < 0.01 / 116).tolist()) == [5, 40, 99]

    def test_null_has_no_signal(self):
        m = gen_synthetic(SyntheticSpec(effect_strength=0.0, seed=3))
        power = np.array([r.series.var(axis=1) for r in m.records])
        adhd = np.array([r.label == "ADHD" for r in m.records])
        p = stats.ttest_ind(power[adhd], power[~adhd], equal_var=False).pvalue
        assert not np.any(p < 0.01 / 116)


class TestLoso:
    def test_table1_nyu_fold(self):
        m = counts_manifest(TABLE1)
        folds = loso_split(m)
        assert [f.test_site for f in folds] == list(TABLE1)
        train, test = folds[0].split(m)
        assert len(train) == 524 and len(test) == 257

    def test_single_site(self):
        with pytest.raises(SplitError):
            loso_split(counts_manifest({"A": (2, 2)}))

    @given(labels=st.lists(st.integers(0, 5), min_size=2, max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_partition(self, labels):
        if len(set(labels)) < 2:
            labels = labels + [max(labels) + 1]
        recs = [SubjectRecord.in_memory(f"s{i}", f"site{s}", "HC", np.zeros((1, 20)))
                for i, s in enumerate(labels)]
        m = Manifest(recs)
        folds = loso_split(m)
        assert len(folds) == len(set(labels))
        tests = [set(r.subject_id for r in f.split(m)[1]) for f in folds]
        assert set().union(*tests) == {r.subject_id for r in recs}
        assert sum(map(len, tests)) == len(recs)
        for f, test_ids in zip(folds, tests):
            train_ids = {r.subject_id for r in f.split(m)[0]}
            assert not train_ids & test_ids and len(train_ids | test_ids) == len(recs)


class TestBalancedBatches:
    def test_table1_totals(self):
        m = counts_manifest(TABLE1, n_rois=1)
        batches = list(balanced_batches(m.records, 32, np.random.default_rng(0)))
        assert len(batches) == 429 // 16
        for b in batches:
            assert Counter(r.label for r in b) == {"ADHD": 16, "HC": 16}
        hc = Counter(r.subject_id for b in batches for r in b if r.label == "HC")
        assert max(hc.values()) == 1

    def test_exact_pool(self):
        m = counts_manifest({"A": (16, 16)}, n_rois=1)
        batches = list(balanced_batches(m.records, 32, np.random.default_rng(0)))
        assert len(batches) == 1
        assert {r.subject_id for r in batches[0]} == {r.subject_id for r in m.records}

    def test_minority_with_replacement(self):
        m = counts_manifest({"A": (5, 64)}, n_rois=1)
        batches = list(balanced_batches(m.records, 32, np.random.default_rng(1)))
        adhd = Counter(r.subject_id for b in batches for r in b if r.label == "ADHD")
        assert len(adhd) == 5 and sum(adhd.values()) == 64

    def test_small_pool(self):
        m = counts_manifest({"A": (3, 2)}, n_rois=1)
        batches = list(balanced_batches(m.records, 32, np.random.default_rng(0)))
        assert len(batches) == 1 and Counter(r.label for r in batches[0]) == {"ADHD": 3, "HC": 3}

    def test_deterministic(self):
        m = counts_manifest({"A": (20, 37)}, n_rois=1)
        ids = lambda s: [[r.subject_id for r in b] for b in balanced_batches(m.records, 8, np.random.default_rng(s))]
        assert ids(3) == ids(3) and ids(3) != ids(4)

    def test_errors(self):
        m = counts_manifest({"A": (0, 4)}, n_rois=1)
        with pytest.raises(ClassAbsentError):
            list(balanced_batches(m.records, 32, np.random.default_rng(0)))
        with pytest.raises(ConfigError):
            list(balanced_batches(counts_manifest({"A": (2, 2)}).records, 31))
