"""``roiranknet`` command line.

Exit status is 0 on success, 1 for usage or configuration errors, 2 for data
problems and 3 for failures during computation.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import SyntheticSpec, gen_synthetic, load_manifest, save_manifest, validate_dataset
from .errors import ConfigError, DataError, RoiRankError, UsageError
from .experiment import (DIRECTIONS, FORMATS, RankingResult,
                         default_jobs, export_report, format_plotdata, format_table,
                         load_result, load_train_config, loso_accuracy, model_comparison,
                         rank_single_roi, reduced_atlas, save_result, topk_sweep)
from .models import VARIANTS, ModelConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with the usage status instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _name_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("manifest", help="manifest.csv or the directory holding it")
    p.add_argument("--config", metavar="PATH", help="experiment file of key = value lines")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")
    p.add_argument("--seed", type=int, help="seed for every random stream (overrides the config)")
    p.add_argument("--jobs", type=_positive,
                   help="worker processes (default: $ROIRANKNET_JOBS, else the CPU count)")
    p.add_argument("--out-dir", default=".", metavar="DIR",
                   help="directory for reports (default: current directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="roiranknet",
                     description="ROI-ranked CNN-RNN classifiers for site-grouped fMRI series.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen-synthetic", help="write a synthetic multi-site dataset")
    p.add_argument("--sites", type=_positive, default=3, help="number of sites (default 3)")
    p.add_argument("--per-class", type=_positive, default=20,
                   help="subjects per site and class (default 20)")
    p.add_argument("--time-len", type=_positive, default=64,
                   help="time points per series (default 64)")
    p.add_argument("--planted", type=_int_list, default=[5, 40, 99], metavar="LIST",
                   help="comma-separated ROIs carrying the ADHD signal (default 5,40,99)")
    p.add_argument("--effect", type=float, default=1.0,
                   help="amplitude of the planted signal (default 1.0)")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    p.add_argument("--out-dir", required=True, metavar="DIR", help="output directory")

    p = sub.add_parser("validate", help="check a dataset and list every violation")
    p.add_argument("manifest", help="manifest.csv or the directory holding it")

    p = sub.add_parser("train", help="LOSO evaluation of one ROI subset")
    _add_training_flags(p)
    p.add_argument("--include-rois", type=_int_list, metavar="LIST",
                   help="comma-separated ROIs in feed order (default: all)")
    p.add_argument("--save-model", action="store_true",
                   help="also write one checkpoint per fold under OUT_DIR/models")

    p = sub.add_parser("rank-roi", help="rank ROIs by single-ROI LOSO accuracy")
    _add_training_flags(p)
    p.add_argument("--atlas-size", type=_positive, metavar="N",
                   help="reduced-atlas mode: rank N evenly spread ROIs")
    p.add_argument("--include-rois", type=_int_list, metavar="LIST",
                   help="ROIs that must be ranked; alone, rank exactly these")

    p = sub.add_parser("sweep", help="top-k or reverse-k sweep over a ranking")
    _add_training_flags(p)
    p.add_argument("--ranking", required=True, metavar="PATH", help="ranking.json from rank-roi")
    p.add_argument("--direction", choices=DIRECTIONS, default="top",
                   help="walk the ranking from the best (top) or worst (reverse) ROI")
    p.add_argument("--k-max", type=_positive, default=20, help="largest subset size (default 20)")

    p = sub.add_parser("compare", help="top-k sweeps for several model variants")
    _add_training_flags(p)
    p.add_argument("--ranking", required=True, metavar="PATH", help="ranking.json from rank-roi")
    p.add_argument("--variants", type=_name_list, default=list(VARIANTS), metavar="LIST",
                   help=f"comma-separated variants (default {','.join(VARIANTS)})")
    p.add_argument("--k-max", type=_positive, default=20, help="largest subset size (default 20)")

    p = sub.add_parser("report", help="render a saved result as a table or plot data")
    p.add_argument("result", help="a .json result written by train, rank-roi, sweep or compare")
    p.add_argument("--format", choices=FORMATS, default="table", help="output format")
    p.add_argument("--output", metavar="PATH", help="write here instead of standard output")
    return parser


# ------------------------------------------------------------------ commands

def _train_config(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return load_train_config(args.config, overrides)


def _jobs(args) -> int:
    return args.jobs if args.jobs is not None else default_jobs()


def _write_outputs(result, out_dir: Path, stem: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_result(result, out_dir / f"{stem}.json")
    export_report(result, out_dir / f"{stem}.txt", "table")
    export_report(result, out_dir / f"{stem}.csv", "plotdata")
    print(format_table(result), end="")
    print(f"wrote {out_dir / stem}.{{json,txt,csv}}")


def _load_ranking(path) -> RankingResult:
    result = load_result(path)
    if not isinstance(result, RankingResult):
        raise ConfigError(f"{path} holds a {type(result).__name__}, not a ranking")
    return result


def cmd_gen_synthetic(args) -> int:
    spec = SyntheticSpec(n_sites=args.sites, subjects_per_site_per_class=args.per_class,
                         T=args.time_len, planted_rois=tuple(args.planted),
                         effect_strength=args.effect, seed=args.seed)
    manifest = gen_synthetic(spec)
    path = save_manifest(manifest, args.out_dir)
    print(f"wrote {len(manifest)} subjects from {len(manifest.sites)} sites to {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    report = validate_dataset(load_manifest(args.manifest, lazy=True))
    print(report.format())
    return EXIT_OK if report.ok else EXIT_DATA


def cmd_train(args) -> int:
    config = _train_config(args)
    manifest = load_manifest(args.manifest)
    subset = args.include_rois or list(range(manifest.n_rois))
    out_dir = Path(args.out_dir)
    model_dir = out_dir / "models" if args.save_model else None
    report = loso_accuracy(manifest, subset, config, jobs=_jobs(args), model_dir=model_dir)
    _write_outputs(report, out_dir, "eval")
    return EXIT_OK


def cmd_rank_roi(args) -> int:
    config = _train_config(args)
    manifest = load_manifest(args.manifest)
    rois = None
    if args.atlas_size is not None:
        rois = reduced_atlas(args.atlas_size, manifest.n_rois, args.include_rois or ())
    elif args.include_rois:
        rois = args.include_rois
    ranking = rank_single_roi(manifest, config, rois, jobs=_jobs(args))
    _write_outputs(ranking, Path(args.out_dir), "ranking")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _train_config(args)
    ranking = _load_ranking(args.ranking)
    manifest = load_manifest(args.manifest)
    sweep = topk_sweep(manifest, ranking, args.k_max, config, args.direction, jobs=_jobs(args))
    _write_outputs(sweep, Path(args.out_dir), f"sweep-{args.direction}")
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _train_config(args)
    ranking = _load_ranking(args.ranking)
    manifest = load_manifest(args.manifest)
    variants = [ModelConfig.for_variant(v) for v in args.variants]
    result = model_comparison(manifest, ranking, variants, args.k_max, config, jobs=_jobs(args))
    _write_outputs(result, Path(args.out_dir), "comparison")
    return EXIT_OK


def cmd_report(args) -> int:
    result = load_result(args.result)
    if args.output:
        export_report(result, args.output, args.format)
    else:
        sys.stdout.write(format_table(result) if args.format == "table"
                         else format_plotdata(result))
    return EXIT_OK


COMMANDS = {
    "gen-synthetic": cmd_gen_synthetic,
    "validate": cmd_validate,
    "train": cmd_train,
    "rank-roi": cmd_rank_roi,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "report": cmd_report,
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, DataError):
        return EXIT_DATA
    return EXIT_RUNTIME


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (RoiRankError, ArithmeticError, OSError, MemoryError) as exc:
        code = exit_code_for(exc)
        kind = {EXIT_USAGE: "usage", EXIT_DATA: "data", EXIT_RUNTIME: "runtime"}[code]
        print(f"roiranknet: {kind} error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
