"""Learning tasks: synthetic datasets with a known optimum, per-point losses
and gradients, and the plain SGD update rule.

Every loss/gradient evaluation here is bit-deterministic: the same inputs
always produce bit-identical outputs. The fault-detection code compares
gradient copies for exact equality, so this determinism is a hard contract,
not a nicety. All reductions use a fixed (index-order) summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TASKS = ("linear_regression", "logistic_regression")

# Convergence targets for the cached optimum of the logistic task.
_OPTIMUM_GRAD_TOL = 1e-8
_NEWTON_TOL = 1e-12
_NEWTON_MAX_ITER = 200


@dataclass(frozen=True)
class DataPoint:
    """A single labelled example: feature vector plus scalar label."""

    features: np.ndarray
    label: float


@dataclass
class Dataset:
    """N labelled points together with the minimizer of their average loss.

    Treated as immutable once constructed; safe to share across trials.
    """

    points: tuple[DataPoint, ...]
    optimum: np.ndarray
    task: str

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if not self.points:
            raise ValueError("dataset must contain at least one point")
        d = self.optimum.shape[0]
        if any(p.features.shape[0] != d for p in self.points):
            raise ValueError("all feature vectors must match the optimum dimension")
        self._X = np.stack([p.features for p in self.points])
        self._y = np.array([p.label for p in self.points], dtype=float)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return int(self.optimum.shape[0])

    def features(self) -> np.ndarray:
        return self._X

    def labels(self) -> np.ndarray:
        return self._y


@dataclass(frozen=True)
class Parameter:
    """Current estimate of the optimum plus the iteration counter."""

    value: np.ndarray
    iteration: int = 0


def _sigmoid(t: float) -> float:
    # Branch keeps exp() arguments non-positive for stability.
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def _linear_grad(w: np.ndarray, x: np.ndarray, y: float) -> np.ndarray:
    return (float(np.dot(x, w)) - y) * x


def _linear_loss(w: np.ndarray, x: np.ndarray, y: float) -> float:
    r = float(np.dot(x, w)) - y
    return 0.5 * r * r


def _logistic_grad(w: np.ndarray, x: np.ndarray, y: float) -> np.ndarray:
    margin = y * float(np.dot(x, w))
    return (-y * _sigmoid(-margin)) * x


def _logistic_loss(w: np.ndarray, x: np.ndarray, y: float) -> float:
    margin = y * float(np.dot(x, w))
    return float(np.logaddexp(0.0, -margin))


_GRAD_FNS = {"linear_regression": _linear_grad, "logistic_regression": _logistic_grad}
_LOSS_FNS = {"linear_regression": _linear_loss, "logistic_regression": _logistic_loss}


def gradient_fn(task: str):
    """Raw per-point gradient callable (w, x, y) -> vector for the hot path."""
    try:
        return _GRAD_FNS[task]
    except KeyError:
        raise ValueError(f"unknown task {task!r}") from None


def loss_fn(task: str):
    """Raw per-point loss callable (w, x, y) -> float."""
    try:
        return _LOSS_FNS[task]
    except KeyError:
        raise ValueError(f"unknown task {task!r}") from None


def gradient(task: str, w: Parameter, z: DataPoint) -> np.ndarray:
    """Exact analytic gradient of the per-point loss at ``w``."""
    if w.value.shape != z.features.shape:
        raise ValueError("parameter and feature dimensions disagree")
    return gradient_fn(task)(w.value, z.features, z.label)


def point_loss(task: str, w: Parameter, z: DataPoint) -> float:
    return loss_fn(task)(w.value, z.features, z.label)


def average_gradient(gradients) -> np.ndarray:
    """Componentwise mean, accumulated sequentially in index order.

    The explicit loop (rather than a pairwise numpy reduction) pins down the
    summation order so honest recomputation is bit-reproducible.
    """
    gradients = list(gradients)
    if not gradients:
        raise ValueError("cannot average an empty gradient sequence")
    d = gradients[0].shape
    total = np.zeros(d)
    for g in gradients:
        if g.shape != d:
            raise ValueError("gradient dimensions disagree")
        total = total + g
    return total / len(gradients)


def sgd_step(w: Parameter, g: np.ndarray, eta: float) -> Parameter:
    """One descent update w' = w - eta * g, incrementing the iteration count."""
    if eta <= 0.0:
        raise ValueError(f"step size must be positive, got {eta}")
    if g.shape != w.value.shape:
        raise ValueError("gradient and parameter dimensions disagree")
    return Parameter(value=w.value - eta * g, iteration=w.iteration + 1)


def observed_loss(task: str, w: Parameter, batch) -> float:
    """Mean per-point loss over a batch at ``w`` (sequential accumulation)."""
    batch = list(batch)
    if not batch:
        raise ValueError("cannot evaluate the loss of an empty batch")
    fn = loss_fn(task)
    total = 0.0
    for z in batch:
        total += fn(w.value, z.features, z.label)
    return total / len(batch)


def full_batch_gradient(task: str, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Average-loss gradient over all rows of (X, y). Used for validation and
    for solving the logistic optimum; not part of the bit-deterministic path."""
    fn = gradient_fn(task)
    total = np.zeros(X.shape[1])
    for i in range(X.shape[0]):
        total = total + fn(w, X[i], float(y[i]))
    return total / X.shape[0]


def _logistic_optimum(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Damped Newton solve of the average logistic loss."""
    n, d = X.shape
    w = np.zeros(d)
    for _ in range(_NEWTON_MAX_ITER):
        margins = y * (X @ w)
        sig = 1.0 / (1.0 + np.exp(-margins))
        grad = -(X.T @ (y * (1.0 - sig))) / n
        if float(np.linalg.norm(grad)) <= _NEWTON_TOL:
            break
        weights = sig * (1.0 - sig)
        hess = (X.T * weights) @ X / n + 1e-12 * np.eye(d)
        w = w - np.linalg.solve(hess, grad)
    grad_norm = float(np.linalg.norm(full_batch_gradient("logistic_regression", w, X, y)))
    if grad_norm > _OPTIMUM_GRAD_TOL:
        raise RuntimeError(
            f"logistic optimum did not converge: gradient norm {grad_norm:.3e}"
        )
    return w


def generate_dataset(task: str, N: int, d: int, seed: int) -> Dataset:
    """Seeded synthetic dataset with an exactly-known optimum.

    linear_regression: labels are exactly x . w_true, so w_true is the unique
    least-squares minimizer and the minimum average loss is zero.
    logistic_regression: labels are +/-1 drawn from the sigmoid model at
    w_true; the optimum is solved at construction time and cached.
    """
    if d < 1 or N < d:
        raise ValueError(f"need N >= d >= 1, got N={N}, d={d}")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, d))
    w_true = rng.standard_normal(d)
    if task == "linear_regression":
        # Per-point dot products: identical arithmetic to the gradient residual,
        # so the gradient at the optimum is exactly zero.
        y = np.array([float(np.dot(X[i], w_true)) for i in range(N)])
        optimum = w_true
    else:
        draws = rng.random(N)
        y = np.array(
            [1.0 if draws[i] < _sigmoid(float(np.dot(X[i], w_true))) else -1.0 for i in range(N)]
        )
        optimum = _logistic_optimum(X, y)
    points = tuple(DataPoint(features=X[i], label=float(y[i])) for i in range(N))
    ds = Dataset(points=points, optimum=optimum, task=task)
    grad_norm = float(np.linalg.norm(full_batch_gradient(task, optimum, X, y)))
    if grad_norm > _OPTIMUM_GRAD_TOL:
        raise RuntimeError(f"optimum check failed: gradient norm {grad_norm:.3e}")
    return ds
