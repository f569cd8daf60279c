"""Site-grouped ROI time-series datasets."""
from .records import (ATLAS_SIZE, LABEL_INDEX, LABELS, MANIFEST_NAME, Manifest, SubjectRecord,
                      load_manifest, read_series, save_manifest, write_series)
from .sampling import Fold, balanced_batches, loso_split
from .synthetic import SyntheticSpec, gen_synthetic, site_names
from .validation import MIN_LENGTH, ValidationReport, Violation, validate_dataset

__all__ = [
    "ATLAS_SIZE", "Fold", "LABELS", "LABEL_INDEX", "MANIFEST_NAME", "MIN_LENGTH", "Manifest",
    "SubjectRecord", "SyntheticSpec", "ValidationReport", "Violation", "balanced_batches",
    "gen_synthetic", "load_manifest", "loso_split", "read_series", "save_manifest", "site_names",
    "validate_dataset", "write_series",
]
