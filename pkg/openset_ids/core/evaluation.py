"""
Evaluation

Closed-set and open-set accuracy, threshold sweeps, the cost-of-unknown
curve and its crossover point.

Ground truth is an array of class indices where -1 marks a record whose
label is outside the known classes (unknown truth).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from ..models.recognizers import PredictionBatch
from .errors import EvaluationError
from .state import Family, SweepRow

logger = logging.getLogger(__name__)


def _check_counts(batch: PredictionBatch, truth: np.ndarray) -> None:
    if len(batch) != len(truth):
        raise EvaluationError(f"{len(batch)} predictions for {len(truth)} test records")
    if len(truth) == 0:
        raise EvaluationError("no test records to evaluate")


def closed_set_accuracy(batch: PredictionBatch, truth: np.ndarray) -> float:
    """Share of records whose argmax class equals the truth; unknown truth is always wrong."""
    truth = np.asarray(truth)
    _check_counts(batch, truth)
    return float(np.mean(batch.argmax == truth))


class OpenSetScore(NamedTuple):
    open_accuracy: float
    known_accuracy: Optional[float]
    unknown_accuracy: Optional[float]
    n_known: int
    n_unknown: int
    rejected: int


def open_set_accuracy(batch: PredictionBatch, truth: np.ndarray, threshold: float) -> OpenSetScore:
    """
    Score predictions at one rejection threshold.

    A record is correct when its truth is known and the accepted prediction
    matches it, or when its truth is unknown and the prediction is UNKNOWN.
    Partition accuracies over an empty partition are None.
    """
    truth = np.asarray(truth)
    _check_counts(batch, truth)
    rejected = batch.rejected(threshold)
    unknown_truth = truth < 0
    correct = np.where(unknown_truth, rejected, ~rejected & (batch.argmax == truth))

    n_unknown = int(unknown_truth.sum())
    n_known = len(truth) - n_unknown
    known_acc = float(correct[~unknown_truth].mean()) if n_known else None
    unknown_acc = float(correct[unknown_truth].mean()) if n_unknown else None
    return OpenSetScore(float(correct.mean()), known_acc, unknown_acc, n_known, n_unknown, int(rejected.sum()))


def threshold_sweep(batch: PredictionBatch, truth: np.ndarray, thresholds: Sequence[float]) -> List[SweepRow]:
    """One open-set row per threshold; probabilities are computed once, upstream."""
    if list(thresholds) != sorted(thresholds):
        raise EvaluationError("thresholds must be sorted ascending")
    rows: List[SweepRow] = []
    for t in thresholds:
        score = open_set_accuracy(batch, truth, t)
        rows.append(
            SweepRow(
                threshold=float(t),
                open_accuracy=score.open_accuracy,
                known_accuracy=score.known_accuracy,
                unknown_accuracy=score.unknown_accuracy,
                unknown_count=score.n_unknown,
                rejected_count=score.rejected,
            )
        )
    return rows


def weight_grid(step: float = 0.01) -> np.ndarray:
    """Weights 0..1 inclusive; both endpoints are exact."""
    points = int(round(1.0 / step))
    if points < 1:
        raise EvaluationError(f"weight step {step} is too large")
    return np.linspace(0.0, 1.0, points + 1)


def cost_of_unknown_curve(
    known_acc: float, unknown_acc: Optional[float], weights: np.ndarray
) -> np.ndarray:
    """perceived(w) = (1 - w) * known + w * unknown; constant at known when unknown is None."""
    weights = np.asarray(weights, dtype=np.float64)
    if unknown_acc is None:
        return np.full(weights.shape, known_acc, dtype=np.float64)
    return (1.0 - weights) * known_acc + weights * unknown_acc


@dataclass
class Curve:
    weights: np.ndarray
    perceived: np.ndarray


def find_crossover(baseline: Curve, wsvm: Curve) -> Optional[float]:
    """Smallest grid weight where the W-SVM curve strictly exceeds the baseline."""
    if not np.array_equal(baseline.weights, wsvm.weights):
        raise EvaluationError("curves are sampled on different weight grids")
    above = np.flatnonzero(wsvm.perceived > baseline.perceived)
    return float(wsvm.weights[above[0]]) if len(above) else None


def curve_column(family: Family, threshold: float) -> str:
    return f"perceived_{Family(family).value}_t{threshold:g}"


@dataclass
class EvaluationReport:
    """Everything ``emit_report`` writes, for every evaluated family."""

    n_total: int
    n_known: int
    n_unknown: int
    thresholds: List[float]
    closed_accuracy: Dict[Family, float] = field(default_factory=dict)
    sweep: Dict[Family, List[SweepRow]] = field(default_factory=dict)
    weights: np.ndarray = field(default_factory=lambda: np.empty(0))
    curves: Dict[str, np.ndarray] = field(default_factory=dict)
    crossovers: Dict[float, Optional[float]] = field(default_factory=dict)
    unknown_by_metatype: Dict[str, int] = field(default_factory=dict)

    @property
    def families(self) -> List[Family]:
        return list(self.closed_accuracy)


def evaluate(
    batches: Mapping[Family, PredictionBatch],
    truth: np.ndarray,
    thresholds: Sequence[float],
    weight_step: float = 0.01,
    unknown_metatypes: Optional[Sequence[str]] = None,
) -> EvaluationReport:
    """
    Build the full report from per-family probability batches.

    Args:
        batches: Probabilities of the test records per family
        truth: Class index per test record, -1 for unknown truth
        thresholds: Sorted rejection thresholds
        weight_step: Cost-of-unknown grid step
        unknown_metatypes: Metatype name of each unknown-truth record, for the roll-up

    Returns:
        EvaluationReport
    """
    truth = np.asarray(truth)
    n_unknown = int(np.sum(truth < 0))
    weights = weight_grid(weight_step)
    report = EvaluationReport(
        n_total=len(truth),
        n_known=len(truth) - n_unknown,
        n_unknown=n_unknown,
        thresholds=[float(t) for t in thresholds],
        weights=weights,
    )
    for family, batch in batches.items():
        family = Family(family)
        report.closed_accuracy[family] = closed_set_accuracy(batch, truth)
        rows = threshold_sweep(batch, truth, thresholds)
        report.sweep[family] = rows
        for row in rows:
            if row["known_accuracy"] is None:
                continue
            report.curves[curve_column(family, row["threshold"])] = cost_of_unknown_curve(
                row["known_accuracy"], row["unknown_accuracy"], weights
            )
        logger.info("%s closed-set accuracy %.4f", family.value, report.closed_accuracy[family])
        for row in rows:
            logger.info(
                "%s t=%g: open %.4f known %s unknown %s",
                family.value, row["threshold"], row["open_accuracy"],
                _fmt(row["known_accuracy"]), _fmt(row["unknown_accuracy"]),
            )

    for t in report.thresholds:
        platt = report.curves.get(curve_column(Family.PLATT, t))
        wsvm = report.curves.get(curve_column(Family.WSVM, t))
        if platt is not None and wsvm is not None:
            crossover = find_crossover(Curve(weights, platt), Curve(weights, wsvm))
            report.crossovers[t] = crossover
            logger.info("t=%g: crossover weight %s", t, _fmt(crossover))

    if unknown_metatypes is not None:
        names, counts = np.unique(np.asarray(unknown_metatypes, dtype=str), return_counts=True)
        report.unknown_by_metatype = {str(n): int(c) for n, c in zip(names, counts)}
    return report


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4f}"
