"""
Report Files

CSV schemas (one header row each):

    closed.csv   family, closed_accuracy, n_total
    sweep.csv    family, threshold, open_accuracy, known_accuracy,
                 unknown_accuracy, n_total, n_known, unknown_count,
                 rejected_count
    curve.csv    weight, then perceived_<family>_t<threshold> per
                 threshold (platt before wsvm)
    grid_search.csv  C, gamma, mean_accuracy, fold_<i>...
    confusion_<family>.csv  truth label rows x predicted class columns
                 plus UNKNOWN

Accuracies over an empty partition are written as ``n/a``. Floats are
written in shortest round-trip form and read back with the round-trip
parser, so values survive a write/read cycle exactly.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import orjson
import pandas as pd

from ..core.evaluation import EvaluationReport, curve_column
from ..core.state import Family, Verdict
from ..models.recognizers import PredictionBatch

logger = logging.getLogger(__name__)

NA = "n/a"
CLOSED_FILE = "closed.csv"
SWEEP_FILE = "sweep.csv"
CURVE_FILE = "curve.csv"
SUMMARY_FILE = "summary.txt"
GRID_FILE = "grid_search.csv"

SWEEP_COLUMNS = [
    "family", "threshold", "open_accuracy", "known_accuracy", "unknown_accuracy",
    "n_total", "n_known", "unknown_count", "rejected_count",
]


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, na_rep=NA, lineterminator="\n")
    return path


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, na_values=[NA], keep_default_na=False, float_precision="round_trip")


def _ordered_families(report: EvaluationReport) -> List[Family]:
    return [f for f in (Family.PLATT, Family.WSVM) if f in report.closed_accuracy]


def closed_frame(report: EvaluationReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"family": f.value, "closed_accuracy": report.closed_accuracy[f], "n_total": report.n_total}
            for f in _ordered_families(report)
        ],
        columns=["family", "closed_accuracy", "n_total"],
    )


def sweep_frame(report: EvaluationReport) -> pd.DataFrame:
    rows = []
    for family in _ordered_families(report):
        for row in report.sweep[family]:
            rows.append({"family": family.value, **row, "n_total": report.n_total, "n_known": report.n_known})
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def curve_frame(report: EvaluationReport) -> pd.DataFrame:
    data = {"weight": report.weights}
    for t in report.thresholds:
        for family in _ordered_families(report):
            column = curve_column(family, t)
            if column in report.curves:
                data[column] = report.curves[column]
    return pd.DataFrame(data)


def summary_text(report: EvaluationReport) -> str:
    lines = [
        "Open set intrusion recognition report",
        "",
        f"test records: {report.n_total} (known truth {report.n_known}, unknown truth {report.n_unknown})",
        "",
        "closed-set accuracy:",
    ]
    for family in _ordered_families(report):
        lines.append(f"  {family.value:<6} {report.closed_accuracy[family]:.4f}")
    if report.thresholds:
        lines += ["", "open-set accuracy (threshold: open / known / unknown / rejected):"]
        for family in _ordered_families(report):
            for row in report.sweep[family]:
                lines.append(
                    f"  {family.value:<6} t={row['threshold']:g}: {row['open_accuracy']:.4f} / "
                    f"{_fmt(row['known_accuracy'])} / {_fmt(row['unknown_accuracy'])} / {row['rejected_count']}"
                )
    if report.crossovers:
        lines += ["", "cost-of-unknown crossover (W-SVM above Platt from weight):"]
        for t, weight in report.crossovers.items():
            lines.append(f"  t={t:g}: {_fmt(weight, '{:.2f}')}")
    if report.unknown_by_metatype:
        lines += ["", "unknown-truth records by metatype:"]
        for name, count in sorted(report.unknown_by_metatype.items()):
            lines.append(f"  {name:<8} {count}")
    return "\n".join(lines) + "\n"


def _fmt(value: Optional[float], pattern: str = "{:.4f}") -> str:
    return NA if value is None else pattern.format(value)


def emit_report(report: EvaluationReport, destination: Path) -> Dict[str, Path]:
    """Write the CSV tables and the text summary into ``destination``."""
    destination = Path(destination)
    destination.mkdir(parents=True, exist_ok=True)
    written = {
        "closed": _write_csv(closed_frame(report), destination / CLOSED_FILE),
        "sweep": _write_csv(sweep_frame(report), destination / SWEEP_FILE),
        "curve": _write_csv(curve_frame(report), destination / CURVE_FILE),
    }
    summary = destination / SUMMARY_FILE
    with open(summary, "w", encoding="utf-8", newline="\n") as f:
        f.write(summary_text(report))
    written["summary"] = summary
    logger.info("report written to %s", destination)
    return written


def read_report(destination: Path) -> Dict[str, pd.DataFrame]:
    destination = Path(destination)
    return {
        "closed": read_csv(destination / CLOSED_FILE),
        "sweep": read_csv(destination / SWEEP_FILE),
        "curve": read_csv(destination / CURVE_FILE),
    }


def write_predictions(
    path: Path,
    batch: PredictionBatch,
    truth_labels: Sequence[str],
    threshold: float,
    per_class: bool = False,
) -> Path:
    """One JSON object per test record."""
    predicted = batch.labels(threshold)
    best = batch.max_probability
    with open(path, "wb") as f:
        for row, (truth, label) in enumerate(zip(truth_labels, predicted)):
            record = {
                "truth": str(truth),
                "predicted": label.value if isinstance(label, Verdict) else label,
                "max_probability": float(best[row]),
                "threshold": threshold,
            }
            if per_class:
                record["probabilities"] = dict(zip(batch.classes, batch.probabilities[row].tolist()))
            f.write(orjson.dumps(record) + b"\n")
    return path


def confusion_frame(batch: PredictionBatch, truth_labels: Sequence[str], threshold: float) -> pd.DataFrame:
    predicted = [p.value if isinstance(p, Verdict) else p for p in batch.labels(threshold)]
    columns = list(batch.classes) + [Verdict.UNKNOWN.value]
    table = pd.crosstab(
        pd.Series(np.asarray(truth_labels, dtype=str), name="truth"),
        pd.Series(pd.Categorical(predicted, categories=columns), name="predicted"),
        dropna=False,
    )
    table.columns.name = None
    return table.reindex(columns=columns, fill_value=0).sort_index()


def write_confusion(path: Path, batch: PredictionBatch, truth_labels: Sequence[str], threshold: float) -> Path:
    confusion_frame(batch, truth_labels, threshold).to_csv(path, lineterminator="\n")
    return path


def write_grid_search(path: Path, frame: pd.DataFrame) -> Path:
    return _write_csv(frame, path)
