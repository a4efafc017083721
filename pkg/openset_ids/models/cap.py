"""
CAP Gate

Compact abating probability gate of one class: a nu one-class RBF machine
plus a lower-tail Weibull over its in-class scores. The Weibull location is
the score of a point with no kernel support, so the gate probability is
exactly 0 far from the class's training data.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from ..core.errors import CalibrationError
from ..core.state import Orientation
from .smo import DEFAULT_MAX_ITER, DEFAULT_TOL, OneClassModel, train_one_class
from .weibull import DEFAULT_TAIL_OFFSET, WeibullModel, weibull_fit

logger = logging.getLogger(__name__)

DEFAULT_DELTA_TAU = 0.001
DEFAULT_NU = 0.1


@dataclass(frozen=True)
class CapGate:
    one_class: OneClassModel
    weibull: WeibullModel
    delta_tau: float

    kind = "cap"

    def prob(self, X: np.ndarray) -> np.ndarray:
        return self.weibull.prob(self.one_class.decision_function(X))

    def passes(self, X: np.ndarray) -> np.ndarray:
        return self.prob(X) >= self.delta_tau

    def to_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind,
            "one_class": self.one_class.to_dict(),
            "weibull": self.weibull.to_dict(),
            "delta_tau": self.delta_tau,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "CapGate":
        if data.get("kind") != cls.kind:
            raise CalibrationError(f"expected a {cls.kind} gate, got {data.get('kind')!r}")
        return cls(
            one_class=OneClassModel.from_dict(data["one_class"]),
            weibull=WeibullModel.from_dict(data["weibull"]),
            delta_tau=float(data["delta_tau"]),
        )


def fit_cap_gate(
    class_vectors: np.ndarray,
    gamma: float,
    delta_tau: float = DEFAULT_DELTA_TAU,
    nu: float = DEFAULT_NU,
    tail_size: Optional[int] = None,
    tail_offset: float = DEFAULT_TAIL_OFFSET,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    cache_mb: float = 256,
) -> CapGate:
    """
    Fit the gate of one class.

    Args:
        class_vectors: The class's training vectors (at least 3)
        gamma: RBF width shared with the class's binary SVM
        delta_tau: Gate threshold in [0, 1]
        nu: One-class nu
        tail_size: Weibull tail size (default rule when None)
        tail_offset: Offset of the fallback location, in tail spreads

    Returns:
        CapGate
    """
    class_vectors = np.atleast_2d(class_vectors)
    if len(class_vectors) < 3:
        raise CalibrationError(f"a CAP gate needs at least 3 class vectors, got {len(class_vectors)}")
    if not 0 <= delta_tau <= 1:
        raise CalibrationError(f"delta_tau must lie in [0, 1], got {delta_tau}")

    one_class = train_one_class(class_vectors, gamma, nu, tol=tol, max_iter=max_iter, cache_mb=cache_mb)
    scores = one_class.decision_function(class_vectors)
    location: Optional[float] = one_class.floor
    if not one_class.floor < scores.min():
        # Some training vector has no kernel support at all; fall back to the offset rule
        logger.warning("one-class floor %.6g does not bound the class scores", one_class.floor)
        location = None
    weibull = weibull_fit(
        scores, tail_size, Orientation.LOWER, tail_offset=tail_offset, location=location
    )
    return CapGate(one_class=one_class, weibull=weibull, delta_tau=delta_tau)
