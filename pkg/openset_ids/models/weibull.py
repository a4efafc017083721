"""
Weibull Tail Models

Maximum-likelihood Weibull fits to the extremes of a score distribution.

A lower-tail model is fit to the smallest samples measured from a location
tau below them and reports the CDF of x - tau (0 at or below tau). An
upper-tail model mirrors the largest samples as tau - x with tau above them
and reports the survival function of the mirrored variable (1 at or above
tau). Both are non-decreasing in x.

An anchored model puts tau on the extreme sample itself and fits the gaps
from it to the rest of the tail, so every sample at or past the extreme
scores exactly 1.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from ..core.errors import CalibrationError
from ..core.state import Orientation

logger = logging.getLogger(__name__)

MIN_TAIL = 3
DEFAULT_TAIL_OFFSET = 10.0
NEWTON_MAX_ITER = 200
NEWTON_RTOL = 1e-12
SHAPE_BOUNDS = (1e-8, 1e8)


@dataclass(frozen=True)
class WeibullModel:
    shape: float
    scale: float
    location: float
    orientation: Orientation

    kind = "weibull"

    def _distance(self, x: np.ndarray) -> np.ndarray:
        if self.orientation is Orientation.LOWER:
            return x - self.location
        return self.location - x

    def prob(self, x):
        """Probability for a scalar or array of scores, always in [0, 1]."""
        x = np.asarray(x, dtype=np.float64)
        d = np.maximum(self._distance(x), 0.0)
        z = np.power(d / self.scale, self.shape)
        if self.orientation is Orientation.LOWER:
            return -np.expm1(-z)
        return np.exp(-z)

    def to_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind,
            "shape": self.shape,
            "scale": self.scale,
            "location": self.location,
            "orientation": self.orientation.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "WeibullModel":
        if data.get("kind") != cls.kind:
            raise CalibrationError(f"expected a {cls.kind} calibrator, got {data.get('kind')!r}")
        return cls(
            shape=float(data["shape"]),
            scale=float(data["scale"]),
            location=float(data["location"]),
            orientation=Orientation(data["orientation"]),
        )


def default_tail_size(pool: int) -> int:
    return max(MIN_TAIL, math.ceil(pool / 2))


def _profile_score(k: float, u: np.ndarray) -> Tuple[float, float]:
    """g(k) and g'(k) for centered log-distances u (mean 0)."""
    w = np.exp(k * u - logsumexp(k * u))
    mean_w = float(w @ u)
    var_w = float(w @ (u * u)) - mean_w * mean_w
    return mean_w - 1.0 / k, max(var_w, 0.0) + 1.0 / (k * k)


def fit_weibull_mle(distances: np.ndarray) -> Tuple[float, float]:
    """
    Two-parameter MLE (shape, scale) of strictly positive distances.

    The shape solves the profile likelihood equation
    sum(d^k ln d) / sum(d^k) - 1/k - mean(ln d) = 0 by Newton steps kept
    inside a bisection bracket.
    """
    d = np.asarray(distances, dtype=np.float64)
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise CalibrationError("Weibull distances must be finite and strictly positive")
    logs = np.log(d)
    center = float(logs.mean())
    u = logs - center
    if np.ptp(u) == 0:
        raise CalibrationError("degenerate tail: all samples are equal")

    lo, hi = 1.0, 1.0
    while _profile_score(lo, u)[0] > 0:
        lo /= 2.0
        if lo < SHAPE_BOUNDS[0]:
            raise CalibrationError("Weibull shape bracket not found below")
    while _profile_score(hi, u)[0] < 0:
        hi *= 2.0
        if hi > SHAPE_BOUNDS[1]:
            raise CalibrationError("Weibull shape bracket not found above")

    k = 0.5 * (lo + hi) if lo != hi else lo
    for _ in range(NEWTON_MAX_ITER):
        g, dg = _profile_score(k, u)
        if g == 0:
            break
        if g < 0:
            lo = k
        else:
            hi = k
        step = k - g / dg
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        if abs(step - k) <= NEWTON_RTOL * k:
            k = step
            break
        k = step
    else:
        raise CalibrationError(f"Weibull MLE did not converge within {NEWTON_MAX_ITER} iterations")

    log_scale = center + (logsumexp(k * u) - math.log(len(u))) / k
    return float(k), float(math.exp(log_scale))


def weibull_fit(
    samples: np.ndarray,
    tail_size: Optional[int] = None,
    orientation: Orientation = Orientation.LOWER,
    tail_offset: float = DEFAULT_TAIL_OFFSET,
    location: Optional[float] = None,
) -> WeibullModel:
    """
    Fit a Weibull model to the extremes of ``samples``.

    Args:
        samples: Scores to draw the tail from
        tail_size: Number of extremes used (max(3, ceil(n/2)) when None)
        orientation: LOWER fits the smallest samples, UPPER the largest
        tail_offset: Default location sits this many tail spreads beyond the
            tail's far end
        location: Explicit location tau; must strictly bound the tail

    Returns:
        WeibullModel
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    tail_size = default_tail_size(len(samples)) if tail_size is None else tail_size
    if tail_size < MIN_TAIL:
        raise CalibrationError(f"tail size must be at least {MIN_TAIL}, got {tail_size}")
    if len(samples) < tail_size:
        raise CalibrationError(f"need {tail_size} samples for the tail, have {len(samples)}")

    ordered = np.sort(samples)
    if orientation is Orientation.LOWER:
        tail = ordered[:tail_size]
    else:
        tail = -ordered[::-1][:tail_size]
    spread = float(tail[-1] - tail[0])
    if spread == 0:
        raise CalibrationError("degenerate tail: all samples are equal")

    if location is None:
        mirrored_location = tail[0] - tail_offset * spread
    else:
        mirrored_location = location if orientation is Orientation.LOWER else -location
        if not mirrored_location < tail[0]:
            raise CalibrationError(f"location {location:g} does not strictly bound the tail")

    shape, scale = fit_weibull_mle(tail - mirrored_location)
    tau = mirrored_location if orientation is Orientation.LOWER else -mirrored_location
    return WeibullModel(shape=shape, scale=scale, location=float(tau), orientation=orientation)


def anchored_fit(
    samples: np.ndarray,
    tail_size: Optional[int] = None,
    extreme: Orientation = Orientation.LOWER,
) -> WeibullModel:
    """
    Reverse Weibull anchored on the most extreme sample of one end.

    The tail is the ``tail_size`` smallest (LOWER) or largest (UPPER)
    samples. The location is the extreme sample itself and the shape and
    scale are fit to the gaps between it and the rest of the tail. The
    returned model is upper-tail: exactly 1 at or above the anchor and
    falling off below it at the rate those gaps set.
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    tail_size = default_tail_size(len(samples)) if tail_size is None else tail_size
    if tail_size < MIN_TAIL:
        raise CalibrationError(f"tail size must be at least {MIN_TAIL}, got {tail_size}")
    if len(samples) < tail_size:
        raise CalibrationError(f"need {tail_size} samples for the tail, have {len(samples)}")

    ordered = np.sort(samples)
    tail = ordered[:tail_size] if extreme is Orientation.LOWER else ordered[::-1][:tail_size]
    anchor = float(tail[0])
    gaps = np.abs(tail[1:] - anchor)
    gaps = gaps[gaps > 0]
    if len(gaps) < 2 or np.ptp(gaps) == 0:
        raise CalibrationError("degenerate tail: too few distinct samples beyond the extreme")

    shape, scale = fit_weibull_mle(gaps)
    return WeibullModel(shape=shape, scale=scale, location=anchor, orientation=Orientation.UPPER)


def weibull_prob(model: WeibullModel, x: float) -> float:
    return float(model.prob(x))
