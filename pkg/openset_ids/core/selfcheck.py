"""
Self-Check

Fast acceptance checks runnable from the CLI: the SMO solver against the
closed-form XOR optimum, Weibull parameter recovery, the abating behavior
of W-SVM next to the unbounded Platt baseline on a three-blob fixture, and
the cost-of-unknown identities. Given a report directory, the identities
and count sums are re-verified on the emitted CSVs.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from ..models.kernel import KernelParams
from ..models.multiclass import SolverSettings, train_ovr
from ..models.recognizers import train_platt, train_wsvm
from ..models.smo import smo_train
from ..models.weibull import weibull_fit
from ..utils import report_io
from .evaluation import curve_column, evaluate
from .state import Family, Orientation

logger = logging.getLogger(__name__)

BLOB_CENTERS = ((0.2, 0.5), (0.5, 0.5), (0.8, 0.5))
BLOB_CLASSES = ("a", "b", "c")
BLOB_KERNEL = KernelParams(c=1000.0, gamma=1.0)
FAR_MULTIPLIERS = (2.0, 5.0, 10.0)
IDENTITY_RTOL = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def three_blobs(n_per_class: int = 20, sigma: float = 0.03, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Three separable Gaussian blobs on a horizontal line inside the unit square."""
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(center, sigma, size=(n_per_class, 2)) for center in BLOB_CENTERS])
    labels = np.repeat(np.arange(len(BLOB_CENTERS)), n_per_class)
    return X, labels


def far_queries(X: np.ndarray, multipliers: Sequence[float], direction: np.ndarray) -> np.ndarray:
    """Points at ``multiplier * diameter`` from the data centroid along ``direction``."""
    centroid = X.mean(axis=0)
    diameter = float(pdist(X).max())
    unit = direction / np.linalg.norm(direction)
    return np.array([centroid + m * diameter * unit for m in multipliers])


def xor_optimum(gamma: float = 1.0) -> float:
    """Closed-form dual objective of the 4-point XOR problem (C large enough)."""
    s = 1.0 + math.exp(-2.0 * gamma) - 2.0 * math.exp(-gamma)
    return -2.0 / s


def check_smo_xor() -> CheckResult:
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    model = smo_train(X, y, KernelParams(1000.0, 1.0), tol=1e-10)
    gap = abs(model.objective - xor_optimum(1.0))
    correct = bool(np.all(np.sign(model.decision_function(X)) == y))
    return CheckResult("smo_xor", gap <= 1e-6 and correct, f"objective gap {gap:.3g}, all correct: {correct}")


def check_weibull_recovery(seed: int = 42) -> CheckResult:
    rng = np.random.default_rng(seed)
    details = []
    passed = True
    for shape, scale in ((2.0, 1.0), (0.8, 3.0)):
        samples = scale * rng.weibull(shape, 1000)
        model = weibull_fit(samples, tail_size=len(samples), orientation=Orientation.LOWER, location=0.0)
        errors = (abs(model.shape - shape) / shape, abs(model.scale - scale) / scale)
        passed &= max(errors) <= 0.1
        details.append(f"k={shape:g}/lambda={scale:g}: fitted {model.shape:.3f}/{model.scale:.3f}")
    return CheckResult("weibull_recovery", passed, "; ".join(details))


def _blob_models(seed: int = 0):
    X, labels = three_blobs(seed=seed)
    binaries = train_ovr(X, labels, BLOB_KERNEL, SolverSettings(), len(BLOB_CLASSES), class_names=BLOB_CLASSES)
    wsvm = train_wsvm(X, labels, BLOB_CLASSES, BLOB_KERNEL, binaries=binaries)
    platt = train_platt(X, labels, BLOB_CLASSES, BLOB_KERNEL, seed=seed, binaries=binaries)
    return X, labels, wsvm, platt


def check_abatement(seed: int = 0) -> CheckResult:
    X, _, wsvm, platt = _blob_models(seed)
    outward = np.asarray(BLOB_CENTERS[0]) - X.mean(axis=0)
    queries = far_queries(X, FAR_MULTIPLIERS, outward)
    wsvm_max = wsvm.predict_batch(queries).max_probability
    platt_max = np.concatenate([
        platt.predict_batch(queries).max_probability,
        platt.predict_batch(far_queries(X, FAR_MULTIPLIERS, -outward)).max_probability,
    ])
    non_increasing = bool(np.all(np.diff(wsvm_max) <= 0))
    farthest_unknown = bool(wsvm_max[-1] < 0.1)
    platt_unbounded = bool(np.any(platt_max > 0.5))
    return CheckResult(
        "abatement",
        non_increasing and farthest_unknown and platt_unbounded,
        f"W-SVM max probabilities {np.round(wsvm_max, 4).tolist()}, "
        f"Platt max far probability {float(platt_max.max()):.4f}",
    )


def check_curve_identities(seed: int = 0) -> CheckResult:
    X, labels, wsvm, platt = _blob_models(seed)
    rng = np.random.default_rng(seed + 1)
    novel = rng.normal((0.5, 0.9), 0.03, size=(20, 2))
    X_test = np.vstack([X, novel])
    truth = np.concatenate([labels, np.full(len(novel), -1)])
    report = evaluate(
        {Family.PLATT: platt.predict_batch(X_test), Family.WSVM: wsvm.predict_batch(X_test)},
        truth,
        [0.0, 0.1, 0.3],
    )
    problems = verify_identities(
        [
            (row["threshold"], row["open_accuracy"], row["known_accuracy"], row["unknown_accuracy"],
             report.n_known, report.n_unknown, report.curves[curve_column(fam, row["threshold"])])
            for fam in report.sweep
            for row in report.sweep[fam]
        ]
    )
    return CheckResult("curve_identities", not problems, "; ".join(problems) or "all identities hold")


def verify_identities(rows) -> List[str]:
    """
    Check perceived(0) = known, perceived(1) = unknown and the open-accuracy
    decomposition for (threshold, open, known, unknown, n_known, n_unknown, curve) rows.
    """
    problems = []
    for threshold, open_acc, known, unknown, n_known, n_unknown, curve in rows:
        curve = np.asarray(curve, dtype=np.float64)
        if known is not None and curve[0] != known:
            problems.append(f"t={threshold:g}: perceived(0) {curve[0]!r} != known {known!r}")
        expected_end = known if unknown is None else unknown
        if curve[-1] != expected_end:
            problems.append(f"t={threshold:g}: perceived(1) {curve[-1]!r} != {expected_end!r}")
        total = n_known + n_unknown
        recomposed = (n_known * (known or 0.0) + n_unknown * (unknown or 0.0)) / total
        if not math.isclose(recomposed, open_acc, rel_tol=IDENTITY_RTOL, abs_tol=IDENTITY_RTOL):
            problems.append(f"t={threshold:g}: open {open_acc!r} != recomposed {recomposed!r}")
    return problems


def check_report_dir(report_dir: Path) -> CheckResult:
    tables = report_io.read_report(report_dir)
    sweep, curve = tables["sweep"], tables["curve"]
    problems = []
    rows = []
    for _, row in sweep.iterrows():
        n_known, n_unknown = int(row["n_known"]), int(row["unknown_count"])
        if n_known + n_unknown != int(row["n_total"]):
            problems.append(f"{row['family']} t={row['threshold']:g}: counts do not sum to n_total")
        known = None if _is_na(row["known_accuracy"]) else float(row["known_accuracy"])
        if known is None:
            # no known-truth records, so no curve was written
            continue
        column = curve_column(row["family"], row["threshold"])
        if column not in curve.columns:
            problems.append(f"missing curve column {column}")
            continue
        unknown = None if _is_na(row["unknown_accuracy"]) else float(row["unknown_accuracy"])
        rows.append(
            (float(row["threshold"]), float(row["open_accuracy"]), known, unknown,
             n_known, n_unknown, curve[column].to_numpy())
        )
    if len(curve) and (curve["weight"].iloc[0] != 0.0 or curve["weight"].iloc[-1] != 1.0):
        problems.append("curve weights do not span [0, 1]")
    problems += verify_identities(rows)
    return CheckResult(f"report:{report_dir}", not problems, "; ".join(problems) or "identities and counts hold")


def _is_na(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


CHECKS: Tuple[Callable[[], CheckResult], ...] = (
    check_smo_xor,
    check_weibull_recovery,
    check_abatement,
    check_curve_identities,
)


def run_self_check(report_dir: Optional[Path] = None) -> List[CheckResult]:
    results = [check() for check in CHECKS]
    if report_dir is not None:
        results.append(check_report_dir(Path(report_dir)))
    for result in results:
        log = logger.info if result.passed else logger.error
        log("%s %s: %s", "PASS" if result.passed else "FAIL", result.name, result.detail)
    return results
