"""Subject records, manifests and their on-disk text formats.

A manifest is a UTF-8 CSV file with the header
``subject_id,site,label,relative_series_path``.  Each series file starts with
a line ``N_R T`` followed by ``N_R`` rows of ``T`` whitespace-separated
decimals.
"""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataLoadError, EmptyDatasetError, ValidationError

LABELS = ("ADHD", "HC")
LABEL_INDEX = {"HC": 0, "ADHD": 1}
ATLAS_SIZE = 116
MANIFEST_HEADER = ("subject_id", "site", "label", "relative_series_path")
MANIFEST_NAME = "manifest.csv"


def read_series(path) -> np.ndarray:
    """Parse one series file into an ``(N_R, T)`` float64 array."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataLoadError(f"cannot read series file {path}: {exc}") from exc
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise DataLoadError(f"{path}: empty series file")
    head = lines[0].split()
    try:
        n_rois, length = (int(v) for v in head)
    except ValueError:
        raise DataLoadError(f"{path}: header must be 'N_R T', got {lines[0]!r}") from None
    if n_rois < 1 or length < 1:
        raise DataLoadError(f"{path}: non-positive dimensions in header {lines[0]!r}")
    rows = lines[1:]
    if len(rows) != n_rois:
        raise DataLoadError(f"{path}: header declares {n_rois} rows but found {len(rows)}")
    out = np.empty((n_rois, length))
    for r, row in enumerate(rows):
        fields_ = row.split()
        if len(fields_) != length:
            raise DataLoadError(
                f"{path}: ragged row {r} has {len(fields_)} values, expected {length}")
        try:
            out[r] = [float(v) for v in fields_]
        except ValueError as exc:
            raise DataLoadError(f"{path}: row {r}: {exc}") from None
    return out


def write_series(path, series: np.ndarray) -> None:
    series = np.asarray(series, dtype=np.float64)
    n_rois, length = series.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{n_rois} {length}\n")
        for row in series:
            fh.write(" ".join(format(v, ".17g") for v in row))
            fh.write("\n")


@dataclass(eq=False)
class SubjectRecord:
    """One subject: an ``(N_R, T)`` ROI-by-time matrix with site and label.

    ``series`` is loaded from ``series_path`` on first access when it was not
    supplied directly.
    """

    subject_id: str
    site: str
    label: str
    series_path: str | None = None
    _series: np.ndarray | None = field(default=None, repr=False)
    root: Path | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValidationError(f"subject {self.subject_id}: label must be ADHD or HC, got {self.label!r}")
        if self._series is not None:
            self._series = np.asarray(self._series, dtype=np.float64)

    @classmethod
    def in_memory(cls, subject_id: str, site: str, label: str, series) -> "SubjectRecord":
        return cls(subject_id, site, label, None, np.asarray(series, dtype=np.float64))

    @property
    def series(self) -> np.ndarray:
        if self._series is None:
            if self.series_path is None:
                raise DataLoadError(f"subject {self.subject_id} has no series data")
            path = Path(self.series_path)
            if self.root is not None and not path.is_absolute():
                path = self.root / path
            self._series = read_series(path)
        return self._series

    @property
    def target(self) -> int:
        return LABEL_INDEX[self.label]

    @property
    def n_rois(self) -> int:
        return self.series.shape[0]

    @property
    def length(self) -> int:
        return self.series.shape[1]

    def same_as(self, other: "SubjectRecord") -> bool:
        return (self.subject_id == other.subject_id and self.site == other.site
                and self.label == other.label and np.array_equal(self.series, other.series))


def check_finite(record: SubjectRecord) -> None:
    bad = ~np.isfinite(record.series)
    if bad.any():
        roi, t = np.argwhere(bad)[0]
        raise ValidationError(
            f"subject {record.subject_id}: non-finite value in ROI {roi} at time {t}",
            record.subject_id, int(roi))


@dataclass
class Manifest:
    """An ordered collection of subject records from one or more sites."""

    records: list
    root: Path | None = None

    def __post_init__(self):
        seen = Counter(r.subject_id for r in self.records)
        dupes = sorted(k for k, v in seen.items() if v > 1)
        if dupes:
            raise DataLoadError(f"duplicate subject_id: {', '.join(dupes)}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def sites(self) -> list[str]:
        """Distinct sites in order of first appearance."""
        return list(dict.fromkeys(r.site for r in self.records))

    @property
    def class_counts(self) -> dict[str, dict[str, int]]:
        counts = {s: {label: 0 for label in LABELS} for s in self.sites}
        for r in self.records:
            counts[r.site][r.label] += 1
        return counts

    def by_site(self, site: str) -> list:
        return [r for r in self.records if r.site == site]

    def excluding_site(self, site: str) -> list:
        return [r for r in self.records if r.site != site]

    @property
    def n_rois(self) -> int:
        return self.records[0].n_rois

    def same_as(self, other: "Manifest") -> bool:
        return (len(self) == len(other)
                and all(a.same_as(b) for a, b in zip(self.records, other.records)))


def load_manifest(path, lazy: bool = False) -> Manifest:
    """Read and validate a manifest and (unless ``lazy``) every series file.

    Raises
    ------
    DataLoadError
        Missing or malformed files, duplicate ids.
    EmptyDatasetError
        A manifest without records.
    ValidationError
        Non-finite samples; the message names the subject and ROI.
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise DataLoadError(f"manifest not found: {path}")
    root = path.parent
    records = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise EmptyDatasetError(f"{path}: empty manifest")
            if tuple(h.strip() for h in header) != MANIFEST_HEADER:
                raise DataLoadError(f"{path}: header must be {','.join(MANIFEST_HEADER)}")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 4:
                    raise DataLoadError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
                sid, site, label, rel = (c.strip() for c in row)
                try:
                    rec = SubjectRecord(sid, site, label, rel, root=root)
                except ValidationError as exc:
                    raise DataLoadError(f"{path}:{lineno}: {exc}") from None
                records.append(rec)
    except OSError as exc:
        raise DataLoadError(f"cannot read manifest {path}: {exc}") from exc
    if not records:
        raise EmptyDatasetError(f"{path}: manifest lists no subjects")
    manifest = Manifest(records, root=root)
    if not lazy:
        for rec in records:
            check_finite(rec)
    return manifest


def save_manifest(manifest: Manifest, out_dir, series_dir: str = "series") -> Path:
    """Write ``manifest.csv`` plus one series file per subject under ``out_dir``."""
    out_dir = Path(out_dir)
    (out_dir / series_dir).mkdir(parents=True, exist_ok=True)
    path = out_dir / MANIFEST_NAME
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for rec in manifest.records:
            rel = f"{series_dir}/{rec.subject_id}.txt"
            write_series(out_dir / rel, rec.series)
            writer.writerow((rec.subject_id, rec.site, rec.label, rel))
    return path
