"""Leave-one-site-out evaluation and the ranking, sweep and comparison protocols.

Every training run is a *unit* ``(roi_subset, seed, test_site)``.  Its random
streams derive only from ``(seed, test_site)``, so a unit gives the same
accuracy whether it runs alone, inside a sweep, or on another worker.
"""
from __future__ import annotations

import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from ..data import LABELS, Manifest
from ..errors import ClassAbsentError, ConfigError, SplitError
from ..models import ModelConfig, build_model, save_checkpoint
from .config import TrainConfig
from .training import check_roi_subset, evaluate_fold, train

DIRECTIONS = ("top", "reverse")

# Published accuracies (%) on the ADHD-200 manifest, kept as reference targets:
# variant -> (best accuracy, its k, accuracy with all 116 ROIs).
REFERENCE_TARGETS = {
    "SCCNN_RNN": (70.6, 15, 63.6),
    "ASCRNN": (69.97, 20, 65.2),
    "ASDRNN": (68.05, 17, 68.4),
    "ASSRNN": (70.46, 13, 66.86),
}


def unit_streams(seed: int, site: str) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (initialization, batching) generators for one fold."""
    key = zlib.crc32(site.encode("utf-8"))
    return (np.random.default_rng([seed, key, 0]),
            np.random.default_rng([seed, key, 1]))


def default_jobs() -> int:
    env = os.environ.get("ROIRANKNET_JOBS")
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError(f"ROIRANKNET_JOBS must be an integer, got {env!r}") from None
        if jobs < 1:
            raise ConfigError("ROIRANKNET_JOBS must be at least 1")
        return jobs
    return os.cpu_count() or 1


# ---------------------------------------------------------------- result types

@dataclass
class EvalReport:
    """LOSO accuracy of one ROI subset, averaged over seeds per site."""

    per_site_accuracy: dict
    roi_subset: list
    config: dict
    seeds: list
    per_seed: list = field(default_factory=list)
    test_sizes: dict = field(default_factory=dict)

    @property
    def sites(self) -> list:
        return list(self.per_site_accuracy)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(list(self.per_site_accuracy.values())))

    def to_dict(self) -> dict:
        return {"kind": "eval", "per_site_accuracy": dict(self.per_site_accuracy),
                "mean_accuracy": self.mean_accuracy, "roi_subset": list(self.roi_subset),
                "config": self.config, "seeds": list(self.seeds), "per_seed": self.per_seed,
                "test_sizes": dict(self.test_sizes)}

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(dict(d["per_site_accuracy"]), list(d["roi_subset"]), d["config"],
                   list(d["seeds"]), list(d.get("per_seed", [])), dict(d.get("test_sizes", {})))


@dataclass
class RankingResult:
    """Single-ROI LOSO accuracies and the resulting rank order.

    ``rois`` lists the evaluated ROIs: the whole atlas, or a reduced candidate
    set.  ``rank_order`` is a permutation of ``rois``.
    """

    per_roi_accuracy: dict
    rank_order: list
    reports: dict
    n_rois: int

    @property
    def rois(self) -> list:
        return sorted(self.per_roi_accuracy)

    @property
    def config(self) -> dict:
        return next(iter(self.reports.values())).config

    @property
    def seeds(self) -> list:
        return next(iter(self.reports.values())).seeds

    def to_dict(self) -> dict:
        return {"kind": "ranking", "n_rois": self.n_rois,
                "per_roi_accuracy": {str(k): v for k, v in self.per_roi_accuracy.items()},
                "rank_order": list(self.rank_order),
                "reports": {str(k): r.to_dict() for k, r in self.reports.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "RankingResult":
        return cls({int(k): v for k, v in d["per_roi_accuracy"].items()},
                   [int(r) for r in d["rank_order"]],
                   {int(k): EvalReport.from_dict(r) for k, r in d["reports"].items()},
                   int(d["n_rois"]))


@dataclass
class SweepResult:
    """LOSO reports for the first ``k`` ROIs of an ordering, ``k = 1..k_max``."""

    points: list
    direction: str
    order: list

    @property
    def ks(self) -> list:
        return [k for k, _ in self.points]

    @property
    def accuracies(self) -> list:
        return [rep.mean_accuracy for _, rep in self.points]

    @property
    def config(self) -> dict:
        return self.points[0][1].config

    @property
    def seeds(self) -> list:
        return self.points[0][1].seeds

    def best(self) -> tuple[int, float]:
        """``(k, accuracy)`` of the best point; the smallest k wins ties."""
        accs = self.accuracies
        i = int(np.argmax(accs))
        return self.ks[i], accs[i]

    def to_dict(self) -> dict:
        return {"kind": "sweep", "direction": self.direction, "order": list(self.order),
                "points": [{"k": k, "report": rep.to_dict()} for k, rep in self.points]}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepResult":
        return cls([(int(p["k"]), EvalReport.from_dict(p["report"])) for p in d["points"]],
                   d["direction"], [int(r) for r in d["order"]])


@dataclass
class ComparisonResult:
    """One sweep per variant plus the best-accuracy summary."""

    sweeps: list

    def summary(self) -> list[dict]:
        rows = []
        for variant, sweep in self.sweeps:
            k, acc = sweep.best()
            rows.append({"variant": variant, "best_accuracy": acc, "best_k": k})
        return rows

    def to_dict(self) -> dict:
        return {"kind": "comparison",
                "sweeps": [{"variant": v, "sweep": s.to_dict()} for v, s in self.sweeps],
                "summary": self.summary()}

    @classmethod
    def from_dict(cls, d: dict) -> "ComparisonResult":
        return cls([(s["variant"], SweepResult.from_dict(s["sweep"])) for s in d["sweeps"]])


# ------------------------------------------------------------------ unit runner

_WORKER_MANIFEST: Manifest | None = None


def _init_worker(manifest: Manifest) -> None:
    global _WORKER_MANIFEST
    _WORKER_MANIFEST = manifest


def train_fold(manifest: Manifest, subset: Sequence[int], config: TrainConfig, seed: int,
               site: str):
    """Train on every site but ``site``; return ``(model, held-out accuracy)``."""
    init_rng, batch_rng = unit_streams(seed, site)
    with threadpool_limits(1):
        model = build_model(config.model, init_rng)
        model, _ = train(model, manifest.excluding_site(site), subset,
                         config.with_(seed=seed), batch_rng)
        return model, evaluate_fold(model, manifest.by_site(site), subset, config.standardize)


def _run_unit(manifest: Manifest, unit: tuple, config: TrainConfig) -> float:
    subset, seed, site = unit
    return train_fold(manifest, subset, config, seed, site)[1]


def _worker(args) -> float:
    unit, config = args
    return _run_unit(_WORKER_MANIFEST, unit, config)


def run_units(manifest: Manifest, units: Sequence[tuple], config: TrainConfig,
              jobs: int = 1) -> list[float]:
    """Accuracy of every unit, in the order given, on ``jobs`` worker processes."""
    units = list(units)
    if jobs <= 1 or len(units) <= 1:
        return [_run_unit(manifest, u, config) for u in units]
    jobs = min(jobs, len(units))
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(manifest,)) as pool:
        return list(pool.map(_worker, [(u, config) for u in units]))


def _check_folds(manifest: Manifest) -> list[str]:
    sites = manifest.sites
    if len(sites) < 2:
        raise SplitError(f"LOSO needs at least 2 sites, manifest has {len(sites)}")
    counts = manifest.class_counts
    for site in sites:
        for label in LABELS:
            if not any(counts[s][label] for s in sites if s != site):
                raise ClassAbsentError(
                    f"fold holding out {site}: training pool has no {label} subjects")
    return sites


def _seeds(config: TrainConfig, seeds) -> list[int]:
    seeds = [config.seed] if seeds is None else [int(s) for s in seeds]
    if not seeds:
        raise ConfigError("at least one seed is required")
    return seeds


def _assemble(manifest, subset, config, seeds, accs) -> EvalReport:
    sites = manifest.sites
    grid = np.asarray(accs, dtype=float).reshape(len(seeds), len(sites))
    per_seed = [{"seed": s, "per_site_accuracy": dict(zip(sites, map(float, row))),
                 "mean_accuracy": float(row.mean())} for s, row in zip(seeds, grid)]
    per_site = {site: float(grid[:, j].mean()) for j, site in enumerate(sites)}
    sizes = {site: len(manifest.by_site(site)) for site in sites}
    return EvalReport(per_site, list(subset), config.to_dict(), list(seeds), per_seed, sizes)


def _subset_units(subset, seeds, sites):
    return [(tuple(subset), s, site) for s in seeds for site in sites]


def _evaluate_subsets(manifest, subsets, config, seeds, jobs) -> list[EvalReport]:
    sites = _check_folds(manifest)
    subsets = [check_roi_subset(s, manifest.n_rois) for s in subsets]
    units = [u for s in subsets for u in _subset_units(s, seeds, sites)]
    accs = run_units(manifest, units, config, jobs)
    n = len(seeds) * len(sites)
    return [_assemble(manifest, s, config, seeds, accs[i * n:(i + 1) * n])
            for i, s in enumerate(subsets)]


# -------------------------------------------------------------------- protocols

def loso_accuracy(manifest: Manifest, roi_subset: Sequence[int], config: TrainConfig,
                  seeds: Sequence[int] | None = None, jobs: int = 1,
                  model_dir=None) -> EvalReport:
    """Leave-one-site-out accuracy of one ROI subset.

    Each fold trains a fresh model on all other sites and tests on the held-out
    one.  With several ``seeds`` the per-site accuracies are seed averages and
    the individual runs are kept in ``per_seed``.  When ``model_dir`` is given
    the folds run in this process and every fold model is saved there as
    ``model-seed<seed>-<site>.bin``.

    Raises
    ------
    SplitError
        Fewer than two sites.
    ClassAbsentError
        Some fold's training pool lacks a class.
    """
    seeds = _seeds(config, seeds)
    if model_dir is None:
        return _evaluate_subsets(manifest, [roi_subset], config, seeds, jobs)[0]
    sites = _check_folds(manifest)
    subset = check_roi_subset(roi_subset, manifest.n_rois)
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    accs = []
    for _, seed, site in _subset_units(subset, seeds, sites):
        model, acc = train_fold(manifest, subset, config, seed, site)
        save_checkpoint(model, model_dir / f"model-seed{seed}-{site}.bin", roi_order=subset)
        accs.append(acc)
    return _assemble(manifest, subset, config, seeds, accs)


def reduced_atlas(size: int, n_rois: int = 116, anchors: Sequence[int] = ()) -> list[int]:
    """A sorted candidate set of ``size`` ROIs: the anchors plus an even spread.

    >>> reduced_atlas(5, 20)
    [0, 5, 10, 14, 19]
    """
    anchors = sorted({int(a) for a in anchors})
    if not 1 <= size <= n_rois:
        raise ConfigError(f"atlas size must be in [1, {n_rois}], got {size}")
    if any(not 0 <= a < n_rois for a in anchors):
        raise ConfigError(f"anchor ROIs must lie in [0, {n_rois - 1}]")
    if len(anchors) > size:
        raise ConfigError(f"{len(anchors)} anchors do not fit an atlas of size {size}")
    chosen = set(anchors)
    for r in np.linspace(0, n_rois - 1, size).round().astype(int):
        if len(chosen) == size:
            break
        chosen.add(int(r))
    for r in range(n_rois):
        if len(chosen) == size:
            break
        chosen.add(r)
    return sorted(chosen)


def rank_order_of(per_roi_accuracy: dict) -> list[int]:
    """ROIs by accuracy, descending; ties go to the lower ROI index."""
    return sorted(per_roi_accuracy, key=lambda r: (-per_roi_accuracy[r], r))


def rank_single_roi(manifest: Manifest, config: TrainConfig, rois: Sequence[int] | None = None,
                    seeds: Sequence[int] | None = None, jobs: int = 1) -> RankingResult:
    """Train one model per ROI and rank the ROIs by LOSO accuracy.

    ``rois`` restricts the candidates (reduced-atlas mode); by default every
    ROI of the atlas is evaluated.
    """
    n_rois = manifest.n_rois
    rois = list(range(n_rois)) if rois is None else sorted({int(r) for r in rois})
    check_roi_subset(rois, n_rois)
    reports = _evaluate_subsets(manifest, [[r] for r in rois], config, _seeds(config, seeds), jobs)
    reports = dict(zip(rois, reports))
    acc = {r: rep.mean_accuracy for r, rep in reports.items()}
    return RankingResult(acc, rank_order_of(acc), reports, n_rois)


def sweep_order(ranking: RankingResult, direction: str) -> list[int]:
    if direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    order = list(ranking.rank_order)
    return order if direction == "top" else order[::-1]


def topk_sweep(manifest: Manifest, ranking: RankingResult, k_max: int, config: TrainConfig,
               direction: str = "top", seeds: Sequence[int] | None = None,
               jobs: int = 1) -> SweepResult:
    """LOSO reports for the first ``k`` ROIs of the ranking, for ``k = 1..k_max``.

    ``direction="reverse"`` walks the ranking from the worst ROI.  ROIs are fed
    to the model in selection order.
    """
    order = sweep_order(ranking, direction)
    if not 1 <= k_max <= len(order):
        raise ConfigError(f"k_max must be in [1, {len(order)}], got {k_max}")
    subsets = [order[:k] for k in range(1, k_max + 1)]
    reports = _evaluate_subsets(manifest, subsets, config, _seeds(config, seeds), jobs)
    return SweepResult(list(zip(range(1, k_max + 1), reports)), direction, order)


def model_comparison(manifest: Manifest, ranking: RankingResult, variants: Sequence,
                     k_max: int = 20, config: TrainConfig | None = None,
                     seeds: Sequence[int] | None = None, jobs: int = 1) -> ComparisonResult:
    """A top-direction sweep per model variant."""
    config = config or TrainConfig()
    out = []
    for v in variants:
        model_cfg = v if isinstance(v, ModelConfig) else ModelConfig.for_variant(v)
        sweep = topk_sweep(manifest, ranking, k_max, config.with_(model=model_cfg),
                           "top", seeds, jobs)
        out.append((model_cfg.variant, sweep))
    return ComparisonResult(out)
