"""
Preprocessing Utilities

Class-balance filters and min-max scaling. The filters operate on the
typed record frame produced by kdd_utils; the scaler operates on encoded
numeric matrices only, so it cannot run before categorical encoding.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Tuple

import numpy as np
import pandas as pd

from ..core.errors import PreprocessError
from .kdd_utils import LABEL_COLUMN

logger = logging.getLogger(__name__)


def _class_counts(frame: pd.DataFrame) -> pd.Series:
    counts = frame[LABEL_COLUMN].value_counts()
    # Ties between equal counts resolve by label name
    order = sorted(counts.index, key=lambda label: (-counts[label], label))
    return counts.reindex(order)


def downsample_dominant(
    train: pd.DataFrame, factor: int, seed: int
) -> Tuple[pd.DataFrame, List[Tuple[str, int, int]]]:
    """
    Shrink the two most frequent classes to ceil(n / factor) records each.

    Args:
        train: Deduplicated training frame
        factor: Reduction factor, >= 1
        seed: Seed for uniform sampling without replacement

    Returns:
        (downsampled frame in original row order, [(class, before, after), ...])
    """
    if factor < 1:
        raise PreprocessError(f"downsample factor must be >= 1, got {factor}")
    counts = _class_counts(train)
    if len(counts) < 2:
        raise PreprocessError(f"downsampling needs at least two classes, found {len(counts)}")

    rng = np.random.default_rng(seed)
    labels = train[LABEL_COLUMN].to_numpy()
    keep = np.ones(len(train), dtype=bool)
    selection = []
    for label in counts.index[:2]:
        positions = np.flatnonzero(labels == label)
        target = math.ceil(len(positions) / factor)
        chosen = rng.choice(positions, size=target, replace=False)
        keep[positions] = False
        keep[chosen] = True
        selection.append((str(label), len(positions), target))
        logger.info("downsampled %s: %d -> %d records", label, len(positions), target)
    return train[keep], selection


def drop_rare_classes(train: pd.DataFrame, min_count: int) -> Tuple[pd.DataFrame, List[str]]:
    """Remove every class with fewer than ``min_count`` training records."""
    if min_count < 0:
        raise PreprocessError(f"min_count must be >= 0, got {min_count}")
    counts = train[LABEL_COLUMN].value_counts()
    dropped = sorted(str(label) for label, n in counts.items() if n < min_count)
    kept = train[~train[LABEL_COLUMN].isin(dropped)]
    if kept.empty:
        raise PreprocessError(f"no training class has at least {min_count} records")
    if dropped:
        logger.info(
            "dropped %d rare classes: %s",
            len(dropped),
            ", ".join(f"{label} ({counts[label]})" for label in dropped),
        )
    return kept, dropped


def cap_per_class(labels: np.ndarray, cap: int, seed: int) -> np.ndarray:
    """
    Stratified subsample: positions of at most ``cap`` records per class.

    Classes are visited in sorted order and the returned positions are
    ascending, so the result depends only on the labels and the seed.
    """
    rng = np.random.default_rng(seed)
    chosen = []
    for label in sorted(set(labels.tolist())):
        positions = np.flatnonzero(labels == label)
        if len(positions) > cap:
            positions = rng.choice(positions, size=cap, replace=False)
        chosen.append(positions)
    if not chosen:
        return np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate(chosen))


@dataclass(frozen=True)
class ScalingParams:
    """Element-wise min/max of the fitted corpus."""

    minimum: np.ndarray
    maximum: np.ndarray

    def to_dict(self) -> Dict[str, List[float]]:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping[str, List[float]]) -> "ScalingParams":
        return cls(np.asarray(data["min"], dtype=np.float64), np.asarray(data["max"], dtype=np.float64))


def fit_scaler(encoded: np.ndarray) -> ScalingParams:
    encoded = np.atleast_2d(np.asarray(encoded, dtype=np.float64))
    if encoded.shape[0] == 0:
        raise PreprocessError("cannot fit a scaler on an empty corpus")
    return ScalingParams(encoded.min(axis=0), encoded.max(axis=0))


def apply_scaler(encoded: np.ndarray, params: ScalingParams) -> np.ndarray:
    """
    Map encoded vectors into [0, 1].

    Works on a single vector or a matrix of row vectors. Values outside the
    fitted range are clamped; constant columns map to 0.
    """
    encoded = np.asarray(encoded, dtype=np.float64)
    span = params.maximum - params.minimum
    constant = span == 0
    scaled = (encoded - params.minimum) / np.where(constant, 1.0, span)
    scaled = np.where(constant, 0.0, scaled)
    return np.clip(scaled, 0.0, 1.0)
