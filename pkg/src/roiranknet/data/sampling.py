"""Leave-one-site-out folds and class-balanced mini-batches."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ..errors import ClassAbsentError, ConfigError, SplitError
from .records import Manifest


@dataclass(frozen=True)
class Fold:
    train_sites: tuple
    test_site: str

    def split(self, manifest: Manifest) -> tuple[list, list]:
        """(train records, test records) for this fold."""
        return manifest.excluding_site(self.test_site), manifest.by_site(self.test_site)


def loso_split(manifest: Manifest) -> list[Fold]:
    """One fold per site: that site is held out, every other site trains."""
    sites = manifest.sites
    if len(sites) < 2:
        raise SplitError(f"leave-one-site-out needs at least 2 sites, got {len(sites)}")
    return [Fold(tuple(s for s in sites if s != test), test) for test in sites]


def balanced_batches(records: Sequence, batch_size: int = 32,
                     rng: np.random.Generator | None = None) -> Iterator[list]:
    """Yield one epoch of mini-batches with equal ADHD and HC counts.

    The larger class is drawn without replacement in a fresh random order;
    each batch takes ``batch_size // 2`` of it and the epoch stops when too
    few remain to fill another half batch.  The smaller class is drawn in
    random order too and topped up with replacement once exhausted.  Pools
    whose larger class is smaller than half a batch yield a single batch
    holding every record of that class.
    """
    if batch_size < 2 or batch_size % 2:
        raise ConfigError(f"batch_size must be a positive even number, got {batch_size}")
    rng = np.random.default_rng(rng)
    adhd = [r for r in records if r.label == "ADHD"]
    hc = [r for r in records if r.label == "HC"]
    if not adhd or not hc:
        missing = "ADHD" if not adhd else "HC"
        raise ClassAbsentError(f"cannot balance batches: no {missing} records in the pool")

    major, minor = (hc, adhd) if len(hc) > len(adhd) else (adhd, hc)
    half = min(batch_size // 2, len(major))
    n_batches = len(major) // half
    major_order = rng.permutation(len(major))[:n_batches * half]
    needed = n_batches * half
    minor_order = rng.permutation(len(minor))
    if needed > len(minor):
        extra = rng.integers(0, len(minor), size=needed - len(minor))
        minor_order = np.concatenate([minor_order, extra])
    minor_order = minor_order[:needed]

    for b in range(n_batches):
        chunk = slice(b * half, (b + 1) * half)
        batch = [major[i] for i in major_order[chunk]] + [minor[i] for i in minor_order[chunk]]
        yield [batch[i] for i in rng.permutation(len(batch))]
