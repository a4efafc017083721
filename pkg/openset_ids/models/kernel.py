"""
RBF Kernel

Gaussian kernel K(x, z) = exp(-gamma * ||x - z||^2), batched kernel blocks,
and the row cache the SMO solver reads Q from.
"""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict

import numpy as np
from sklearn.metrics.pairwise import rbf_kernel as _rbf_block

from ..core.errors import ConfigError

logger = logging.getLogger(__name__)

# Queries scored per kernel block
BLOCK_ROWS = 4096


@dataclass(frozen=True)
class KernelParams:
    """Soft-margin penalty C and RBF width gamma."""

    c: float
    gamma: float

    def __post_init__(self):
        if not (self.c > 0 and self.gamma > 0):
            raise ConfigError(f"kernel parameters must be positive, got C={self.c}, gamma={self.gamma}")

    def to_dict(self) -> Dict[str, float]:
        return {"c": self.c, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "KernelParams":
        return cls(c=float(data["c"]), gamma=float(data["gamma"]))


def rbf_kernel(x: np.ndarray, z: np.ndarray, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {z.shape}")
    diff = x - z
    return math.exp(-gamma * float(diff @ diff))


def kernel_matrix(X: np.ndarray, Z: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel block between the rows of X and the rows of Z."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if X.shape[1] != Z.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]}")
    return _rbf_block(X, Z, gamma=gamma)


def kernel_expansion(X: np.ndarray, vectors: np.ndarray, coef: np.ndarray, gamma: float) -> np.ndarray:
    """sum_i coef_i K(vectors_i, x) for every row x of X, computed block-wise."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = np.empty(X.shape[0], dtype=np.float64)
    if len(coef) == 0:
        out.fill(0.0)
        return out
    for start in range(0, X.shape[0], BLOCK_ROWS):
        stop = start + BLOCK_ROWS
        out[start:stop] = kernel_matrix(X[start:stop], vectors, gamma) @ coef
    return out


class KernelCache:
    """
    Least-recently-used cache of kernel matrix rows over one training set.

    Rows do not depend on labels, so one cache can serve every one-vs-rest
    problem built on the same vectors. ``evaluations`` counts kernel values
    actually computed.
    """

    def __init__(self, X: np.ndarray, gamma: float, cache_mb: float = 256):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.gamma = gamma
        self.size = self.X.shape[0]
        self._sq_norms = np.einsum("ij,ij->i", self.X, self.X)
        row_bytes = max(8 * self.size, 1)
        self.max_rows = max(2, int(cache_mb * 1024 * 1024) // row_bytes)
        self._rows: "OrderedDict[int, np.ndarray]" = OrderedDict()
        self.evaluations = 0
        self.hits = 0

    def diagonal(self) -> np.ndarray:
        return np.ones(self.size, dtype=np.float64)

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return cached
        sq = self._sq_norms + self._sq_norms[i] - 2.0 * (self.X @ self.X[i])
        np.maximum(sq, 0.0, out=sq)
        values = np.exp(-self.gamma * sq)
        values[i] = 1.0
        self.evaluations += self.size
        self._rows[i] = values
        if len(self._rows) > self.max_rows:
            self._rows.popitem(last=False)
        return values
