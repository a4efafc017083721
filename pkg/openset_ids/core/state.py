"""
Shared State Definitions

Enumerations and typed records passed between the pipeline stages.
"""

from enum import Enum
from typing import Dict, List, Optional, TypedDict


class FeatureKind(str, Enum):
    """How a KDD attribute is typed."""
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    BINARY = "binary"


class Metatype(str, Enum):
    """Attack metatypes of the KDD'99 intrusion hierarchy."""
    DOS = "DoS"
    PROBE = "Probe"
    R2L = "R2L"
    U2R = "U2R"
    NORMAL = "Normal"
    UNLISTED = "unlisted"


class Orientation(str, Enum):
    """Which extremes a Weibull model is fit to."""
    LOWER = "lower-tail"
    UPPER = "upper-tail"


class Family(str, Enum):
    """The two recognizer families compared by the pipeline."""
    PLATT = "platt"
    WSVM = "wsvm"


class Verdict(str, Enum):
    """Prediction outcome that is not a trained class."""
    UNKNOWN = "UNKNOWN"


UNKNOWN = Verdict.UNKNOWN


class SweepRow(TypedDict):
    """One open-set evaluation row at a single threshold."""
    threshold: float
    open_accuracy: float
    known_accuracy: Optional[float]
    unknown_accuracy: Optional[float]  # None when there is no unknown-truth record
    unknown_count: int
    rejected_count: int


class CurvePoint(TypedDict):
    """Perceived accuracy of each (family, threshold) pair at one weight."""
    weight: float
    perceived: Dict[str, float]


class PrepareSummary(TypedDict):
    """Record counts logged and persisted by the prepare step."""
    train_raw: int
    train_dedup: int
    test_raw: int
    test_dedup: int
    train_after_downsample: int
    train_after_filter: int
    downsampled_classes: List[str]
    dropped_classes: List[str]
    unknown_classes: List[str]
