"""
Multi-class Recognizers

The two families compared by the pipeline, both built on the same
one-vs-rest binary SVMs:

- PlattModel: per-class sigmoid over the decision value. Thresholdable but
  its support is unbounded.
- WsvmModel: per-class product of a CAP gate indicator and two anchored
  Weibull models over the decision value, P_eta (at or beyond the
  negatives' largest score) and P_psi (at or beyond the positives' smallest
  score). Both fall off below their anchor.

A prediction is UNKNOWN iff the largest per-class probability is below the
threshold, otherwise the argmax with ties going to the lowest class index.
Per-class probabilities are never renormalized.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from ..core.config import CalibrationConfig
from ..core.errors import ConfigError, OpenSetIdsError
from ..core.state import UNKNOWN, Family, Orientation, Verdict
from .cap import CapGate, fit_cap_gate
from .kernel import KernelParams
from .multiclass import SolverSettings, ovr_labels, train_ovr
from .platt import PlattCalibrator, cross_validated_decision_values, platt_fit
from .smo import BinarySvmModel
from .weibull import WeibullModel, anchored_fit

logger = logging.getLogger(__name__)

Predicted = Union[int, Verdict]


def _check_threshold(threshold: float) -> None:
    if not 0 <= threshold <= 1:
        raise ConfigError(f"threshold must lie in [0, 1], got {threshold}")


def decide(probabilities: np.ndarray, threshold: float) -> Predicted:
    """Accept/reject rule for one query's per-class probabilities."""
    _check_threshold(threshold)
    best = int(np.argmax(probabilities))
    return UNKNOWN if probabilities[best] < threshold else best


@dataclass(frozen=True)
class OpenSetPrediction:
    per_class_probability: Dict[str, float]
    predicted: Predicted
    threshold_used: float

    @property
    def is_unknown(self) -> bool:
        return self.predicted is UNKNOWN


@dataclass
class PredictionBatch:
    """Per-class probabilities of many queries; thresholds are applied afterwards."""

    classes: Tuple[str, ...]
    probabilities: np.ndarray

    def __len__(self) -> int:
        return self.probabilities.shape[0]

    @property
    def argmax(self) -> np.ndarray:
        return np.argmax(self.probabilities, axis=1)

    @property
    def max_probability(self) -> np.ndarray:
        return np.max(self.probabilities, axis=1)

    def rejected(self, threshold: float) -> np.ndarray:
        _check_threshold(threshold)
        return self.max_probability < threshold

    def labels(self, threshold: float) -> List[Union[str, Verdict]]:
        rejected = self.rejected(threshold)
        return [UNKNOWN if r else self.classes[k] for r, k in zip(rejected, self.argmax)]

    def prediction(self, row: int, threshold: float) -> OpenSetPrediction:
        probabilities = self.probabilities[row]
        return OpenSetPrediction(
            per_class_probability={c: float(p) for c, p in zip(self.classes, probabilities)},
            predicted=decide(probabilities, threshold),
            threshold_used=threshold,
        )


def _named_failure(error: OpenSetIdsError, name: str) -> OpenSetIdsError:
    context = {k: v for k, v in error.context.items() if k != "class_name"}
    return type(error)(f"class {name}: {error.message}", class_name=name, **context)


# ---------------------------------------------------------------------------
# W-SVM
# ---------------------------------------------------------------------------

@dataclass
class WsvmClassModel:
    binary: BinarySvmModel
    eta: WeibullModel
    psi: WeibullModel
    gate: CapGate

    def probability(self, X: np.ndarray, decision: Optional[np.ndarray] = None) -> np.ndarray:
        f = self.binary.decision_function(X) if decision is None else decision
        indicator = self.gate.passes(X)
        return np.where(indicator, self.eta.prob(f) * self.psi.prob(f), 0.0)

    def to_dict(self) -> Dict[str, object]:
        return {
            "binary": self.binary.to_dict(),
            "eta": self.eta.to_dict(),
            "psi": self.psi.to_dict(),
            "gate": self.gate.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "WsvmClassModel":
        return cls(
            binary=BinarySvmModel.from_dict(data["binary"]),
            eta=WeibullModel.from_dict(data["eta"]),
            psi=WeibullModel.from_dict(data["psi"]),
            gate=CapGate.from_dict(data["gate"]),
        )


@dataclass
class WsvmModel:
    classes: Tuple[str, ...]
    class_models: List[WsvmClassModel]

    family = Family.WSVM

    @property
    def binaries(self) -> List[BinarySvmModel]:
        return [m.binary for m in self.class_models]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.column_stack([m.probability(X) for m in self.class_models])

    def predict_batch(self, X: np.ndarray) -> PredictionBatch:
        return PredictionBatch(self.classes, self.predict_proba(X))

    def to_dict(self) -> Dict[str, object]:
        return {name: m.to_dict() for name, m in zip(self.classes, self.class_models)}

    @classmethod
    def from_dict(cls, classes: Sequence[str], data: Dict[str, object]) -> "WsvmModel":
        return cls(tuple(classes), [WsvmClassModel.from_dict(data[name]) for name in classes])


def _fit_wsvm_class(X, labels, k, name, binary, params, calibration, settings) -> WsvmClassModel:
    try:
        decision = binary.decision_function(X)
        own = labels == k
        # eta: 1 at or above the negatives' largest score; psi: 1 at or above the positives' smallest
        eta = anchored_fit(decision[~own], calibration.tail_size, extreme=Orientation.UPPER)
        psi = anchored_fit(decision[own], calibration.tail_size, extreme=Orientation.LOWER)
        gate = fit_cap_gate(
            X[own],
            params.gamma,
            delta_tau=calibration.delta_tau,
            nu=calibration.nu,
            tail_size=calibration.tail_size,
            tail_offset=calibration.tail_offset,
            tol=settings.tol,
            max_iter=settings.max_iter,
            cache_mb=settings.cache_mb,
        )
    except OpenSetIdsError as e:
        raise _named_failure(e, name) from e
    logger.debug(
        "%s: eta k=%.4g lambda=%.4g, psi k=%.4g lambda=%.4g, gate k=%.4g",
        name, eta.shape, eta.scale, psi.shape, psi.scale, gate.weibull.shape,
    )
    return WsvmClassModel(binary=binary, eta=eta, psi=psi, gate=gate)


def train_wsvm(
    X: np.ndarray,
    labels: np.ndarray,
    classes: Sequence[str],
    params: KernelParams,
    calibration: CalibrationConfig = CalibrationConfig(),
    settings: SolverSettings = SolverSettings(),
    workers: int = 1,
    binaries: Optional[List[BinarySvmModel]] = None,
) -> WsvmModel:
    """
    Train the W-SVM recognizer.

    Args:
        X: Preprocessed training vectors of known classes
        labels: Class index per vector, in ``classes`` order
        classes: Known class names
        params: C and gamma
        calibration: Tail size, tail offset, delta_tau and nu
        settings: Solver settings
        workers: joblib worker count for the per-class fits
        binaries: Already trained one-vs-rest SVMs to reuse

    Returns:
        WsvmModel
    """
    labels = np.asarray(labels)
    if binaries is None:
        binaries = train_ovr(X, labels, params, settings, len(classes), workers, classes)
    fitted = Parallel(n_jobs=workers)(
        delayed(_fit_wsvm_class)(X, labels, k, name, binaries[k], params, calibration, settings)
        for k, name in enumerate(classes)
    )
    return WsvmModel(tuple(classes), list(fitted))


def wsvm_predict(model: WsvmModel, x: np.ndarray, delta_r: float) -> OpenSetPrediction:
    return model.predict_batch(np.atleast_2d(x)).prediction(0, delta_r)


# ---------------------------------------------------------------------------
# Platt
# ---------------------------------------------------------------------------

@dataclass
class PlattClassModel:
    binary: BinarySvmModel
    calibrator: PlattCalibrator

    def probability(self, X: np.ndarray) -> np.ndarray:
        return self.calibrator.prob(self.binary.decision_function(X))

    def to_dict(self) -> Dict[str, object]:
        return {"binary": self.binary.to_dict(), "platt": self.calibrator.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "PlattClassModel":
        return cls(BinarySvmModel.from_dict(data["binary"]), PlattCalibrator.from_dict(data["platt"]))


@dataclass
class PlattModel:
    classes: Tuple[str, ...]
    class_models: List[PlattClassModel]

    family = Family.PLATT

    @property
    def binaries(self) -> List[BinarySvmModel]:
        return [m.binary for m in self.class_models]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.column_stack([m.probability(X) for m in self.class_models])

    def predict_batch(self, X: np.ndarray) -> PredictionBatch:
        return PredictionBatch(self.classes, self.predict_proba(X))

    def to_dict(self) -> Dict[str, object]:
        return {name: m.to_dict() for name, m in zip(self.classes, self.class_models)}

    @classmethod
    def from_dict(cls, classes: Sequence[str], data: Dict[str, object]) -> "PlattModel":
        return cls(tuple(classes), [PlattClassModel.from_dict(data[name]) for name in classes])


def _fit_platt_class(X, labels, k, name, binary, params, calibration, settings, seed) -> PlattClassModel:
    y = ovr_labels(labels, k)
    try:
        values = cross_validated_decision_values(
            X,
            y,
            params,
            folds=calibration.platt_folds,
            seed=seed,
            tol=settings.tol,
            max_iter=settings.max_iter,
            cache_mb=settings.cache_mb,
            class_weighting=settings.class_weighting,
        )
        calibrator = platt_fit(values, y)
    except OpenSetIdsError as e:
        raise _named_failure(e, name) from e
    logger.debug("%s: Platt A=%.6g B=%.6g", name, calibrator.a, calibrator.b)
    return PlattClassModel(binary=binary, calibrator=calibrator)


def train_platt(
    X: np.ndarray,
    labels: np.ndarray,
    classes: Sequence[str],
    params: KernelParams,
    calibration: CalibrationConfig = CalibrationConfig(),
    settings: SolverSettings = SolverSettings(),
    seed: int = 42,
    workers: int = 1,
    binaries: Optional[List[BinarySvmModel]] = None,
) -> PlattModel:
    """Train the Platt-calibrated recognizer (sigmoids fit on cross-validated decision values)."""
    labels = np.asarray(labels)
    if binaries is None:
        binaries = train_ovr(X, labels, params, settings, len(classes), workers, classes)
    fitted = Parallel(n_jobs=workers)(
        delayed(_fit_platt_class)(X, labels, k, name, binaries[k], params, calibration, settings, seed)
        for k, name in enumerate(classes)
    )
    return PlattModel(tuple(classes), list(fitted))


def platt_predict(model: PlattModel, x: np.ndarray, threshold: float) -> OpenSetPrediction:
    return model.predict_batch(np.atleast_2d(x)).prediction(0, threshold)


Recognizer = Union[PlattModel, WsvmModel]
