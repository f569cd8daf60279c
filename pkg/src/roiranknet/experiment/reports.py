"""Report files: readable tables, plottable CSV series and JSON result dumps.

A ``plotdata`` file is a block of ``# key: value`` metadata lines (values are
JSON) followed by a CSV header and one numeric row per point.  Accuracies are
written with 17 significant digits so parsing recovers them exactly.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import ConfigError, ReportError
from .protocols import (REFERENCE_TARGETS, ComparisonResult, EvalReport, RankingResult,
                        SweepResult)

FORMATS = ("table", "plotdata")
_RESULT_TYPES = {"eval": EvalReport, "ranking": RankingResult, "sweep": SweepResult,
                 "comparison": ComparisonResult}


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _kind(result) -> str:
    for kind, cls in _RESULT_TYPES.items():
        if isinstance(result, cls):
            return kind
    raise ConfigError(f"cannot export object of type {type(result).__name__}")


def _meta(result) -> dict:
    kind = _kind(result)
    if kind == "comparison":
        first = result.sweeps[0][1]
        meta = {"kind": kind, "variants": [v for v, _ in result.sweeps],
                "order": first.order, "seeds": first.seeds}
        meta["configs"] = {v: s.config for v, s in result.sweeps}
        return meta
    meta = {"kind": kind, "config": result.config, "seeds": result.seeds}
    if kind == "eval":
        meta["roi_subset"] = result.roi_subset
        meta["sites"] = result.sites
        meta["test_sizes"] = result.test_sizes
        meta["mean_accuracy"] = result.mean_accuracy
    elif kind == "ranking":
        meta["n_rois"] = result.n_rois
        meta["rank_order"] = result.rank_order
    else:
        meta["direction"] = result.direction
        meta["order"] = result.order
    return meta


def _plot_rows(result) -> tuple[list[str], list[list]]:
    kind = _kind(result)
    if kind == "eval":
        return ["site_index", "accuracy"], [[i, acc] for i, acc in
                                            enumerate(result.per_site_accuracy.values())]
    if kind == "ranking":
        return ["roi", "accuracy"], [[r, result.per_roi_accuracy[r]] for r in result.rois]
    if kind == "sweep":
        return ["k", "accuracy"], [[k, acc] for k, acc in zip(result.ks, result.accuracies)]
    sweeps = result.sweeps
    header = ["k"] + [v for v, _ in sweeps]
    ks = sweeps[0][1].ks
    return header, [[k] + [s.accuracies[i] for _, s in sweeps] for i, k in enumerate(ks)]


def format_plotdata(result) -> str:
    out = io.StringIO()
    for key, value in _meta(result).items():
        out.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
    header, rows = _plot_rows(result)
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join([str(int(row[0]))] + [_num(v) for v in row[1:]]) + "\n")
    return out.getvalue()


def _config_lines(config: dict) -> list[str]:
    model = config.get("model", {})
    train = ", ".join(f"{k}={config[k]}" for k in config if k != "model")
    return [f"variant: {model.get('variant')}", f"training: {train}"]


def format_table(result) -> str:
    kind = _kind(result)
    lines = []
    if kind == "eval":
        lines.append("LOSO evaluation")
        lines += _config_lines(result.config)
        lines.append(f"seeds: {result.seeds}")
        lines.append(f"ROI subset: {result.roi_subset}")
        lines.append("")
        lines.append(f"{'site':<12}{'n':>6}{'accuracy':>12}")
        for site, acc in result.per_site_accuracy.items():
            lines.append(f"{site:<12}{result.test_sizes.get(site, ''):>6}{acc:>12.4f}")
        lines.append(f"{'mean':<12}{'':>6}{result.mean_accuracy:>12.4f}")
    elif kind == "ranking":
        lines.append("single-ROI ranking")
        lines += _config_lines(result.config)
        lines.append(f"seeds: {result.seeds}")
        lines.append(f"ROIs evaluated: {len(result.rois)} of {result.n_rois}")
        lines.append("")
        lines.append(f"{'rank':>5}{'roi':>6}{'accuracy':>12}")
        for i, r in enumerate(result.rank_order, start=1):
            lines.append(f"{i:>5}{r:>6}{result.per_roi_accuracy[r]:>12.4f}")
    elif kind == "sweep":
        lines.append(f"{result.direction}-k sweep")
        lines += _config_lines(result.config)
        lines.append(f"seeds: {result.seeds}")
        lines.append("")
        lines.append(f"{'k':>4}{'roi added':>11}{'accuracy':>12}")
        for k, acc in zip(result.ks, result.accuracies):
            lines.append(f"{k:>4}{result.order[k - 1]:>11}{acc:>12.4f}")
        best_k, best = result.best()
        lines.append(f"best: {best:.4f} at k = {best_k}")
    else:
        lines.append("model comparison")
        lines.append(f"seeds: {result.sweeps[0][1].seeds}")
        lines.append("")
        lines.append(f"{'variant':<12}{'best acc':>10}{'k':>5}{'reference':>14}")
        for row in result.summary():
            ref = REFERENCE_TARGETS.get(row["variant"])
            ref_txt = f"{ref[0]:.2f}({ref[1]})" if ref else "-"
            lines.append(f"{row['variant']:<12}{100 * row['best_accuracy']:>10.2f}"
                         f"{row['best_k']:>5}{ref_txt:>14}")
        lines.append("reference: published accuracy (%) and k on ADHD-200")
    return "\n".join(lines) + "\n"


def export_report(result, path, format: str = "table") -> Path:
    """Write ``result`` as a ``table`` or ``plotdata`` file."""
    if format not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}, got {format!r}")
    text = format_table(result) if format == "table" else format_plotdata(result)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write report {path}: {exc}") from exc
    return path


@dataclass
class PlotData:
    meta: dict
    columns: list
    x: list
    y: list     # one list per non-x column


def parse_plotdata(path_or_text) -> PlotData:
    """Read a file produced by ``export_report(..., format="plotdata")``."""
    text = path_or_text
    if isinstance(path_or_text, Path) or "\n" not in str(path_or_text):
        try:
            text = Path(path_or_text).read_text(encoding="utf-8")
        except OSError as exc:
            raise ReportError(f"cannot read report {path_or_text}: {exc}") from exc
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        elif line.strip():
            body.append(line)
    if not body:
        raise ReportError("plotdata has no header row")
    rows = list(csv.reader(body))
    columns = rows[0]
    x = [int(r[0]) for r in rows[1:]]
    y = [[float(r[j]) for r in rows[1:]] for j in range(1, len(columns))]
    return PlotData(meta, columns, x, y)


def save_result(result, path) -> Path:
    """JSON dump of any protocol result; floats round-trip exactly."""
    path = Path(path)
    try:
        path.write_text(json.dumps(result.to_dict(), indent=1) + "\n",
                        encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write result {path}: {exc}") from exc
    return path


def load_result(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ReportError(f"cannot read result {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path} is not a result file: {exc}") from exc
    kind = d.get("kind") if isinstance(d, dict) else None
    if kind not in _RESULT_TYPES:
        raise ReportError(f"{path}: unknown result kind {kind!r}")
    return _RESULT_TYPES[kind].from_dict(d)
