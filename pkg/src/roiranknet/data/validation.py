"""Dataset-level checks that report every problem instead of stopping at the first."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataLoadError
from .records import LABELS, Manifest

# four width-3 convolutions at dilation 2 consume 16 samples
MIN_LENGTH = 17


@dataclass(frozen=True)
class Violation:
    severity: str       # "error" or "warning"
    code: str
    message: str
    subject_id: str | None = None
    site: str | None = None
    roi: int | None = None


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def errors(self) -> list:
        return [v for v in self.violations if v.severity == "error"]

    @property
    def warnings(self) -> list:
        return [v for v in self.violations if v.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def format(self) -> str:
        if not self.violations:
            return "no violations"
        return "\n".join(f"{v.severity}: {v.code}: {v.message}" for v in self.violations)


def validate_dataset(manifest: Manifest, min_length: int = MIN_LENGTH) -> ValidationReport:
    """Check record invariants, shared ROI count, minimum length and class presence."""
    report = ValidationReport()
    add = report.violations.append

    ids = Counter(r.subject_id for r in manifest.records)
    for sid, n in ids.items():
        if n > 1:
            add(Violation("error", "duplicate-id", f"subject_id {sid} appears {n} times", sid))

    roi_counts = Counter()
    for rec in manifest.records:
        try:
            series = rec.series
        except DataLoadError as exc:
            add(Violation("error", "unreadable", str(exc), rec.subject_id, rec.site))
            continue
        roi_counts[series.shape[0]] += 1
        bad = ~np.isfinite(series)
        if bad.any():
            for roi in np.unique(np.argwhere(bad)[:, 0]):
                add(Violation("error", "non-finite",
                              f"subject {rec.subject_id}: non-finite values in ROI {roi}",
                              rec.subject_id, rec.site, int(roi)))
        if series.shape[1] < min_length:
            add(Violation("error", "too-short",
                          f"subject {rec.subject_id}: {series.shape[1]} time points < {min_length}",
                          rec.subject_id, rec.site))

    if len(roi_counts) > 1:
        detail = ", ".join(f"{n} ROIs x {c}" for n, c in sorted(roi_counts.items()))
        add(Violation("error", "mixed-roi-count", f"records disagree on ROI count: {detail}"))

    for site, counts in manifest.class_counts.items():
        for label in LABELS:
            if counts[label] == 0:
                add(Violation("warning", "class-absent",
                              f"site {site} has no {label} subjects", site=site))
    return report
