"""
SMO Solver

Sequential minimal optimization for the kernel SVM dual

    min  1/2 a^T Q a + p^T a
    s.t. y^T a = const,  0 <= a_i <= C_i,   Q_ij = y_i y_j K(x_i, x_j)

with maximal-violating-pair, second-order working set selection. The same
solver trains the soft-margin binary machine (p = -1) and the nu one-class
machine (y = +1, p = 0, C_i = 1, sum a = nu * l).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..core.errors import SolverError
from .kernel import KernelCache, KernelParams, kernel_expansion

logger = logging.getLogger(__name__)

TAU = 1e-12
DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 10_000_000


@dataclass
class SolverResult:
    alpha: np.ndarray
    rho: float
    objective: float
    n_iter: int
    max_violation: float


def _gradient(cache: KernelCache, y: np.ndarray, p: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    grad = p.astype(np.float64).copy()
    for i in np.flatnonzero(alpha):
        grad += alpha[i] * y[i] * y * cache.row(i)
    return grad


def _select_working_set(grad, y, alpha, upper, diag, cache, tol):
    yG = y * grad
    up = np.where(y > 0, alpha < upper, alpha > 0)
    low = np.where(y > 0, alpha > 0, alpha < upper)

    minus_yG = np.where(up, -yG, -np.inf)
    i = int(np.argmax(minus_yG))
    g_max = minus_yG[i]
    g_max2 = np.max(np.where(low, yG, -np.inf))
    violation = g_max + g_max2
    if not np.isfinite(violation) or violation < tol:
        return -1, -1, violation

    k_i = cache.row(i)
    b = g_max + yG
    a = diag[i] + diag - 2.0 * k_i
    a[a <= 0] = TAU
    gain = np.where(low & (b > 0), -(b * b) / a, np.inf)
    j = int(np.argmin(gain))
    if not np.isfinite(gain[j]):
        return -1, -1, violation
    return i, j, violation


def _update_pair(i, j, grad, y, alpha, upper, q_ij, q_ii, q_jj):
    c_i, c_j = upper[i], upper[j]
    if y[i] != y[j]:
        quad = q_ii + q_jj + 2.0 * q_ij
        if quad <= 0:
            quad = TAU
        delta = (-grad[i] - grad[j]) / quad
        diff = alpha[i] - alpha[j]
        alpha[i] += delta
        alpha[j] += delta
        if diff > 0:
            if alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = diff
        elif alpha[i] < 0:
            alpha[i] = 0.0
            alpha[j] = -diff
        if diff > c_i - c_j:
            if alpha[i] > c_i:
                alpha[i] = c_i
                alpha[j] = c_i - diff
        elif alpha[j] > c_j:
            alpha[j] = c_j
            alpha[i] = c_j + diff
    else:
        quad = q_ii + q_jj - 2.0 * q_ij
        if quad <= 0:
            quad = TAU
        delta = (grad[i] - grad[j]) / quad
        total = alpha[i] + alpha[j]
        alpha[i] -= delta
        alpha[j] += delta
        if total > c_i:
            if alpha[i] > c_i:
                alpha[i] = c_i
                alpha[j] = total - c_i
        elif alpha[j] < 0:
            alpha[j] = 0.0
            alpha[i] = total
        if total > c_j:
            if alpha[j] > c_j:
                alpha[j] = c_j
                alpha[i] = total - c_j
        elif alpha[i] < 0:
            alpha[i] = 0.0
            alpha[j] = total


def _compute_rho(grad, y, alpha, upper) -> float:
    yG = y * grad
    at_upper = alpha >= upper
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yG[free].mean())
    # Bounded vectors only: midpoint of the feasible interval
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


def solve_dual(
    cache: KernelCache,
    y: np.ndarray,
    p: np.ndarray,
    upper: np.ndarray,
    alpha: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SolverResult:
    """
    Solve the generic dual problem over the vectors held by ``cache``.

    Args:
        cache: Kernel rows of the training vectors
        y: +1/-1 label per vector
        p: Linear term of the objective
        upper: Per-vector upper bound C_i
        alpha: Feasible starting point (zeros when None)
        tol: Stop once the maximal KKT violation m(a) - M(a) drops below tol
        max_iter: Iteration cap; exhausting it raises SolverError

    Returns:
        SolverResult with the dual solution and rho (decision offset is -rho)
    """
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    alpha = np.zeros(cache.size) if alpha is None else np.array(alpha, dtype=np.float64)
    diag = cache.diagonal()
    grad = _gradient(cache, y, p, alpha)

    n_iter = 0
    while True:
        i, j, violation = _select_working_set(grad, y, alpha, upper, diag, cache, tol)
        if i < 0:
            break
        if n_iter >= max_iter:
            raise SolverError(
                f"SMO did not converge within {max_iter} iterations "
                f"(max KKT violation {violation:.3g}, tol {tol:g}, {cache.size} vectors)",
                iterations=n_iter,
                max_violation=float(violation),
                size=cache.size,
            )
        k_i = cache.row(i)
        k_j = cache.row(j)
        old_i, old_j = alpha[i], alpha[j]
        _update_pair(i, j, grad, y, alpha, upper, y[i] * y[j] * k_i[j], diag[i], diag[j])
        delta_i = alpha[i] - old_i
        delta_j = alpha[j] - old_j
        grad += y * (y[i] * delta_i * k_i + y[j] * delta_j * k_j)
        n_iter += 1

    rho = _compute_rho(grad, y, alpha, upper)
    objective = float(0.5 * alpha @ (grad + p))
    logger.debug("SMO finished: %d iterations, objective %.6g, violation %.3g", n_iter, objective, violation)
    return SolverResult(alpha, rho, objective, n_iter, float(max(violation, 0.0)))


@dataclass
class BinarySvmModel:
    """Dual solution of a soft-margin RBF SVM; only vectors with a_i > 0 are kept."""

    support_vectors: np.ndarray
    dual_coef: np.ndarray  # a_i * y_i
    bias: float
    kernel: KernelParams
    objective: float = 0.0
    n_iter: int = 0
    max_violation: float = 0.0
    support_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def n_support(self) -> int:
        return len(self.dual_coef)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return kernel_expansion(X, self.support_vectors, self.dual_coef, self.kernel.gamma) + self.bias

    def to_dict(self) -> Dict[str, object]:
        return {
            "support_vectors": self.support_vectors,
            "dual_coef": self.dual_coef,
            "bias": self.bias,
            "kernel": self.kernel.to_dict(),
            "objective": self.objective,
            "n_iter": self.n_iter,
            "max_violation": self.max_violation,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "BinarySvmModel":
        coef = np.asarray(data["dual_coef"], dtype=np.float64)
        vectors = np.asarray(data["support_vectors"], dtype=np.float64).reshape(len(coef), -1)
        return cls(
            support_vectors=vectors,
            dual_coef=coef,
            bias=float(data["bias"]),
            kernel=KernelParams.from_dict(data["kernel"]),
            objective=float(data.get("objective", 0.0)),
            n_iter=int(data.get("n_iter", 0)),
            max_violation=float(data.get("max_violation", 0.0)),
        )


def decision_value(model: BinarySvmModel, x: np.ndarray) -> float:
    return float(model.decision_function(np.atleast_2d(x))[0])


def smo_train(
    X: np.ndarray,
    y: np.ndarray,
    params: KernelParams,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    cache: Optional[KernelCache] = None,
    cache_mb: float = 256,
    class_weighting: bool = False,
) -> BinarySvmModel:
    """
    Train a binary soft-margin SVM.

    Args:
        X: Training vectors, shape (l, d)
        y: Labels in {+1, -1}
        params: C and gamma
        tol: Stopping tolerance on the maximal KKT violation
        max_iter: SMO iteration cap
        cache: Kernel row cache over X to reuse (built when None)
        cache_mb: Budget of a freshly built cache
        class_weighting: Scale C per side by the opposite side's share

    Returns:
        BinarySvmModel with decision f(x) = sum a_i y_i K(x_i, x) + b
    """
    y = np.asarray(y, dtype=np.float64)
    if tol <= 0:
        raise SolverError(f"tolerance must be positive, got {tol}")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SolverError("binary training needs both +1 and -1 labels")
    if cache is None:
        cache = KernelCache(X, params.gamma, cache_mb)
    elif cache.size != len(y) or cache.gamma != params.gamma:
        raise SolverError("kernel cache does not match the training problem")

    upper = np.full(len(y), params.c)
    if class_weighting:
        n_pos, n_neg = np.sum(y > 0), np.sum(y < 0)
        upper[y > 0] = params.c * len(y) / (2.0 * n_pos)
        upper[y < 0] = params.c * len(y) / (2.0 * n_neg)

    result = solve_dual(cache, y, -np.ones(len(y)), upper, tol=tol, max_iter=max_iter)
    support = np.flatnonzero(result.alpha > 0)
    return BinarySvmModel(
        support_vectors=cache.X[support].copy(),
        dual_coef=result.alpha[support] * y[support],
        bias=-result.rho,
        kernel=params,
        objective=result.objective,
        n_iter=result.n_iter,
        max_violation=result.max_violation,
        support_indices=support,
    )


@dataclass
class OneClassModel:
    """nu one-class machine; score(x) = sum a_i K(x_i, x) - rho."""

    support_vectors: np.ndarray
    coef: np.ndarray
    rho: float
    gamma: float
    nu: float

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return kernel_expansion(X, self.support_vectors, self.coef, self.gamma) - self.rho

    @property
    def floor(self) -> float:
        """Score of a point with no kernel support."""
        return -self.rho

    def to_dict(self) -> Dict[str, object]:
        return {
            "support_vectors": self.support_vectors,
            "coef": self.coef,
            "rho": self.rho,
            "gamma": self.gamma,
            "nu": self.nu,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "OneClassModel":
        coef = np.asarray(data["coef"], dtype=np.float64)
        return cls(
            support_vectors=np.asarray(data["support_vectors"], dtype=np.float64).reshape(len(coef), -1),
            coef=coef,
            rho=float(data["rho"]),
            gamma=float(data["gamma"]),
            nu=float(data["nu"]),
        )


def train_one_class(
    X: np.ndarray,
    gamma: float,
    nu: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    cache_mb: float = 256,
) -> OneClassModel:
    """Train a nu one-class machine on the rows of X."""
    if not 0 < nu <= 1:
        raise SolverError(f"nu must lie in (0, 1], got {nu}")
    cache = KernelCache(X, gamma, cache_mb)
    size = cache.size
    budget = nu * size
    whole = int(math.floor(budget))
    alpha = np.zeros(size)
    alpha[:whole] = 1.0
    if whole < size:
        alpha[whole] = budget - whole
    result = solve_dual(cache, np.ones(size), np.zeros(size), np.ones(size), alpha, tol, max_iter)
    support = np.flatnonzero(result.alpha > 0)
    return OneClassModel(cache.X[support].copy(), result.alpha[support], result.rho, gamma, nu)
