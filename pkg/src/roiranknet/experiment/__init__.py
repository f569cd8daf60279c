"""Training loops, LOSO evaluation and the ROI ranking protocols."""
from .config import CONFIG_KEYS, TrainConfig, build_train_config, load_train_config, parse_assignments
from .protocols import (DIRECTIONS, REFERENCE_TARGETS, ComparisonResult, EvalReport,
                        RankingResult, SweepResult, default_jobs, loso_accuracy,
                        model_comparison, rank_order_of, rank_single_roi, reduced_atlas,
                        run_units, sweep_order, topk_sweep, unit_streams)
from .reports import (FORMATS, PlotData, export_report, format_plotdata, format_table,
                      load_result, parse_plotdata, save_result)
from .training import evaluate_fold, predict, stack_inputs, standardize_series, train

__all__ = [
    "CONFIG_KEYS", "DIRECTIONS", "FORMATS", "REFERENCE_TARGETS", "ComparisonResult",
    "EvalReport", "PlotData", "RankingResult", "SweepResult", "TrainConfig",
    "build_train_config", "default_jobs", "evaluate_fold", "export_report", "format_plotdata",
    "format_table", "load_result", "load_train_config", "loso_accuracy", "model_comparison",
    "parse_assignments", "parse_plotdata", "predict", "rank_order_of", "rank_single_roi",
    "reduced_atlas", "run_units", "save_result", "stack_inputs", "standardize_series",
    "sweep_order", "topk_sweep", "train", "unit_streams",
]
