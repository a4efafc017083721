"""
One-vs-Rest Decomposition and Grid Search

Trains one binary RBF SVM per known class (class k as +1, every other
class as -1) and selects (C, gamma) by stratified cross-validated
closed-set accuracy.
"""

import itertools
import logging
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.model_selection import StratifiedKFold
from tqdm import tqdm

from ..core.errors import PreprocessError, SolverError
from .kernel import KernelCache, KernelParams
from .smo import DEFAULT_MAX_ITER, DEFAULT_TOL, BinarySvmModel, smo_train

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    cache_mb: float = 256
    class_weighting: bool = False

    @classmethod
    def from_config(cls, kernel_config) -> "SolverSettings":
        return cls(
            tol=kernel_config.tol,
            max_iter=kernel_config.max_iter,
            cache_mb=kernel_config.cache_mb,
            class_weighting=kernel_config.class_weighting,
        )


def _progress(iterable, **kwargs):
    return tqdm(iterable, disable=not sys.stderr.isatty(), leave=False, **kwargs)


def ovr_labels(labels: np.ndarray, k: int) -> np.ndarray:
    return np.where(labels == k, 1.0, -1.0)


def _train_one(X, labels, k, params, settings, cache=None) -> BinarySvmModel:
    try:
        return smo_train(
            X,
            ovr_labels(labels, k),
            params,
            tol=settings.tol,
            max_iter=settings.max_iter,
            cache=cache,
            cache_mb=settings.cache_mb,
            class_weighting=settings.class_weighting,
        )
    except SolverError as e:
        raise SolverError(f"class {k}: {e.message}", class_index=k, **e.context) from e


def train_ovr(
    X: np.ndarray,
    labels: np.ndarray,
    params: KernelParams,
    settings: SolverSettings = SolverSettings(),
    n_classes: Optional[int] = None,
    workers: int = 1,
    class_names: Optional[Sequence[str]] = None,
) -> List[BinarySvmModel]:
    """
    Train one binary model per class index 0..n_classes-1.

    Args:
        X: Training vectors
        labels: Class index per vector
        params: C and gamma shared by every binary problem
        settings: Solver tolerance, iteration cap and cache budget
        n_classes: Number of classes (max label + 1 when None)
        workers: joblib worker count; 1 shares a single kernel cache
        class_names: Names used in log messages

    Returns:
        Binary models in class index order
    """
    labels = np.asarray(labels)
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    if n_classes < 2:
        raise SolverError("one-vs-rest training needs at least two classes")
    names = list(class_names) if class_names is not None else [str(k) for k in range(n_classes)]

    if workers == 1:
        cache = KernelCache(X, params.gamma, settings.cache_mb)
        models = [
            _train_one(X, labels, k, params, settings, cache)
            for k in _progress(range(n_classes), desc="one-vs-rest", total=n_classes)
        ]
        logger.debug("kernel cache: %d evaluations, %d row hits", cache.evaluations, cache.hits)
    else:
        models = Parallel(n_jobs=workers)(
            delayed(_train_one)(X, labels, k, params, settings) for k in range(n_classes)
        )
    for name, model in zip(names, models):
        logger.info(
            "trained %s: %d support vectors, %d iterations, objective %.6g",
            name, model.n_support, model.n_iter, model.objective,
        )
    return models


def ovr_decision_values(models: Sequence[BinarySvmModel], X: np.ndarray) -> np.ndarray:
    """Decision values of every binary model, shape (n, n_classes)."""
    X = np.atleast_2d(X)
    return np.column_stack([m.decision_function(X) for m in models])


def ovr_predict(models: Sequence[BinarySvmModel], X: np.ndarray) -> np.ndarray:
    """Closed-set argmax prediction (ties go to the lowest index)."""
    return np.argmax(ovr_decision_values(models, X), axis=1)


@dataclass
class GridSearchResult:
    best: KernelParams
    table: Dict[Tuple[float, float], float]
    fold_scores: Dict[Tuple[float, float], List[float]] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for (c, gamma), mean in sorted(self.table.items()):
            row = {"C": c, "gamma": gamma, "mean_accuracy": mean}
            for fold, score in enumerate(self.fold_scores.get((c, gamma), [])):
                row[f"fold_{fold}"] = score
            rows.append(row)
        return pd.DataFrame(rows)


def _score_cell(X, labels, n_classes, splits, params, settings) -> List[float]:
    scores = []
    for train_idx, test_idx in splits:
        models = train_ovr(X[train_idx], labels[train_idx], params, settings, n_classes=n_classes)
        predicted = ovr_predict(models, X[test_idx])
        scores.append(float(np.mean(predicted == labels[test_idx])))
    return scores


def grid_search_cv(
    X: np.ndarray,
    labels: np.ndarray,
    grid_c: Sequence[float],
    grid_gamma: Sequence[float],
    folds: int = 3,
    seed: int = 42,
    settings: SolverSettings = SolverSettings(),
    workers: int = 1,
    class_names: Optional[Sequence[str]] = None,
) -> GridSearchResult:
    """
    Cross-validated search over the (C, gamma) grid.

    Every class needs at least ``folds`` members. The best cell maximizes
    mean fold accuracy; ties go to the smaller C, then the smaller gamma.
    """
    labels = np.asarray(labels)
    if folds < 2:
        raise PreprocessError(f"grid search needs at least 2 folds, got {folds}")
    counts = np.bincount(labels)
    n_classes = len(counts)
    for k, count in enumerate(counts):
        if count < folds:
            name = class_names[k] if class_names is not None else str(k)
            raise PreprocessError(f"class {name} has {count} members, fewer than {folds} folds", class_name=name)

    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    splits = list(splitter.split(X, labels))
    cells = [KernelParams(c, g) for c, g in itertools.product(sorted(grid_c), sorted(grid_gamma))]

    runs = Parallel(n_jobs=workers)(
        delayed(_score_cell)(X, labels, n_classes, splits, params, settings)
        for params in _progress(cells, desc="grid search")
    )
    fold_scores = {(p.c, p.gamma): scores for p, scores in zip(cells, runs)}
    table = {key: float(np.mean(scores)) for key, scores in fold_scores.items()}
    for (c, gamma), mean in sorted(table.items()):
        logger.info("grid C=%g gamma=%g: mean accuracy %.4f", c, gamma, mean)
    (c, gamma) = min(table, key=lambda key: (-table[key], key[0], key[1]))
    logger.info("grid search selected C=%g gamma=%g (%.4f)", c, gamma, table[(c, gamma)])
    return GridSearchResult(best=KernelParams(c, gamma), table=table, fold_scores=fold_scores)
