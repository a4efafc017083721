"""
Platt Calibration

Sigmoid p(f) = 1 / (1 + exp(A*f + B)) fit by regularized maximum likelihood
with smoothed targets, using Newton's method with backtracking line search.
The sigmoid never abates: p -> 1 as f -> +inf for A < 0.
"""

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy.special import expit
from sklearn.model_selection import StratifiedKFold

from ..core.errors import CalibrationError
from .kernel import KernelParams
from .smo import smo_train

logger = logging.getLogger(__name__)

MAX_ITER = 100
MIN_STEP = 1e-10
SIGMA = 1e-12
EPS = 1e-5


@dataclass(frozen=True)
class PlattCalibrator:
    a: float
    b: float

    kind = "platt"

    def prob(self, f):
        """Probability for a scalar or array of decision values."""
        return expit(-(self.a * np.asarray(f, dtype=np.float64) + self.b))

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind, "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "PlattCalibrator":
        if data.get("kind") != cls.kind:
            raise CalibrationError(f"expected a {cls.kind} calibrator, got {data.get('kind')!r}")
        return cls(a=float(data["a"]), b=float(data["b"]))


def _objective(z: np.ndarray, targets: np.ndarray) -> float:
    # sum of t*z + log(1 + exp(-z)), evaluated without overflow
    return float(np.sum(targets * z + np.logaddexp(0.0, -z)))


def platt_fit(decision_values: np.ndarray, labels: np.ndarray) -> PlattCalibrator:
    """
    Fit (A, B) to decision values and their +1/-1 labels.

    Args:
        decision_values: Calibration scores, ideally held-out
        labels: +1/-1 per score

    Returns:
        PlattCalibrator
    """
    f = np.asarray(decision_values, dtype=np.float64)
    y = np.asarray(labels)
    if not np.all(np.isfinite(f)):
        raise CalibrationError("decision values must be finite")
    positive = y > 0
    n_pos = int(positive.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise CalibrationError("Platt fitting needs both positive and negative labels")

    targets = np.where(positive, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    fval = _objective(f * a + b, targets)

    for iteration in range(MAX_ITER):
        z = f * a + b
        p = expit(-z)
        d2 = p * (1.0 - p)
        h11 = SIGMA + np.sum(f * f * d2)
        h22 = SIGMA + np.sum(d2)
        h21 = np.sum(f * d2)
        d1 = targets - p
        g1 = np.sum(f * d1)
        g2 = np.sum(d1)
        if abs(g1) < EPS and abs(g2) < EPS:
            break

        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db

        step = 1.0
        while step >= MIN_STEP:
            new_a, new_b = a + step * da, b + step * db
            new_f = _objective(f * new_a + new_b, targets)
            if new_f < fval + 1e-4 * step * gd:
                a, b, fval = new_a, new_b, new_f
                break
            step /= 2.0
        if step < MIN_STEP:
            logger.warning("Platt line search failed at iteration %d; keeping A=%.6g B=%.6g", iteration, a, b)
            break
    else:
        logger.warning("Platt fitting reached %d iterations", MAX_ITER)

    if not (np.isfinite(a) and np.isfinite(b)):
        raise CalibrationError("Platt fitting diverged")
    return PlattCalibrator(a=float(a), b=float(b))


def platt_prob(calibrator: PlattCalibrator, f: float) -> float:
    return float(calibrator.prob(f))


def cross_validated_decision_values(
    X: np.ndarray,
    y: np.ndarray,
    params: KernelParams,
    folds: int = 3,
    seed: int = 42,
    **solver_kwargs,
) -> np.ndarray:
    """
    Held-out decision values for Platt fitting.

    Each vector is scored by a binary SVM trained on the other folds. With
    fewer members of a label than folds the fold count drops to that label's
    size, and a label with a single member cannot be held out at all, so the
    vectors are scored by a machine trained on all of them.
    """
    y = np.asarray(y, dtype=np.float64)
    smallest = int(min(np.sum(y > 0), np.sum(y < 0)))
    if smallest < 2:
        if smallest == 1:
            logger.debug("a label has one member; using resubstitution decision values")
            return smo_train(X, y, params, **solver_kwargs).decision_function(X)
        return np.full(len(y), y[0])

    splitter = StratifiedKFold(n_splits=min(folds, smallest), shuffle=True, random_state=seed)
    values = np.empty(len(y), dtype=np.float64)
    for train_idx, test_idx in splitter.split(X, y):
        model = smo_train(X[train_idx], y[train_idx], params, **solver_kwargs)
        values[test_idx] = model.decision_function(X[test_idx])
    return values
