"""Synthetic site-grouped ROI time series with planted discriminative ROIs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from ..errors import ConfigError
from .records import ATLAS_SIZE, Manifest, SubjectRecord

SITE_NAMES = ("NYU", "Peking", "OHSU", "KKI", "NI")
SMOOTHING_SIGMA = 2.0
# cycles per sample of the planted oscillation; sits above the smoothed noise band
PLANTED_FREQUENCY = 0.2


@dataclass(frozen=True)
class SyntheticSpec:
    n_sites: int = 3
    subjects_per_site_per_class: int = 20
    T: int = 64
    planted_rois: tuple = (5, 40, 99)
    effect_strength: float = 1.0
    site_shift_scale: float = 0.5
    seed: int = 0
    n_rois: int = ATLAS_SIZE

    def __post_init__(self):
        object.__setattr__(self, "planted_rois", tuple(sorted(int(r) for r in self.planted_rois)))
        if self.n_sites < 1 or self.subjects_per_site_per_class < 1:
            raise ConfigError("n_sites and subjects_per_site_per_class must be positive")
        if self.T < 1 or self.n_rois < 1:
            raise ConfigError("T and n_rois must be positive")
        if any(r < 0 or r >= self.n_rois for r in self.planted_rois):
            raise ConfigError(f"planted ROIs must lie in [0, {self.n_rois - 1}]")
        if self.effect_strength < 0:
            raise ConfigError("effect_strength must be non-negative")
        if self.site_shift_scale < 0:
            raise ConfigError("site_shift_scale must be non-negative")


def site_names(n_sites: int) -> list[str]:
    if n_sites <= len(SITE_NAMES):
        return list(SITE_NAMES[:n_sites])
    return [f"SITE{i:02d}" for i in range(n_sites)]


def _smoothed_noise(rng: np.random.Generator, n_rois: int, length: int) -> np.ndarray:
    white = rng.standard_normal((n_rois, length))
    smooth = gaussian_filter1d(white, SMOOTHING_SIGMA, axis=1, mode="wrap")
    # rescale to unit marginal variance using the kernel's energy
    impulse = np.zeros(8 * int(SMOOTHING_SIGMA) + 1 + 64)
    impulse[len(impulse) // 2] = 1.0
    gain = np.sqrt(np.sum(gaussian_filter1d(impulse, SMOOTHING_SIGMA) ** 2))
    return smooth / gain


def gen_synthetic(spec: SyntheticSpec) -> Manifest:
    """Generate a balanced multi-site dataset.

    Every ROI series is Gaussian-smoothed white noise with unit variance.
    Each site scales and offsets every ROI by its own random factors.  ADHD
    subjects additionally carry, in each planted ROI, a sinusoid of amplitude
    ``effect_strength`` with a random phase.  HC subjects never do, so with
    ``effect_strength == 0`` labels are independent of the data.
    """
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.T)
    planted = np.array(spec.planted_rois, dtype=int)
    records = []
    for site in site_names(spec.n_sites):
        amplitude = np.exp(0.5 * spec.site_shift_scale * rng.standard_normal(spec.n_rois))
        offset = spec.site_shift_scale * rng.standard_normal(spec.n_rois)
        for label in ("ADHD", "HC"):
            for i in range(spec.subjects_per_site_per_class):
                series = _smoothed_noise(rng, spec.n_rois, spec.T)
                phase = rng.uniform(0.0, 2.0 * np.pi, size=len(planted))
                if label == "ADHD" and len(planted):
                    wave = np.sin(2.0 * np.pi * PLANTED_FREQUENCY * t[None, :] + phase[:, None])
                    series[planted] += spec.effect_strength * wave
                series = amplitude[:, None] * series + offset[:, None]
                sid = f"{site}-{label}-{i:04d}"
                records.append(SubjectRecord.in_memory(sid, site, label, series))
    return Manifest(records)
