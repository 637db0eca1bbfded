"""Base predictors: RBF kernel ridge regression and a softmax classifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist, pdist
from scipy.special import log_softmax, softmax

from .core import as_points

log = logging.getLogger(__name__)


def median_heuristic(X: np.ndarray) -> float:
    """Median pairwise Euclidean distance; 1.0 when it is undefined or zero."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(X)))
    return med if med > 0 else 1.0


def rbf_kernel(A: np.ndarray, B: np.ndarray, bandwidth: float) -> np.ndarray:
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * bandwidth**2))


@dataclass(frozen=True, eq=False)
class KernelRidgeModel:
    support_points: np.ndarray
    dual_coefficients: np.ndarray
    bandwidth: float
    ridge: float

    def predict(self, X):
        Xb, single = as_points(X, self.support_points.shape[1])
        out = rbf_kernel(Xb, self.support_points, self.bandwidth) @ self.dual_coefficients
        return float(out[0]) if single else out

    __call__ = predict


def fit_kernel_ridge(X, y, bandwidth: float | None = None, ridge: float = 1e-2) -> KernelRidgeModel:
    """Solve ``(K + ridge I) c = y`` by Cholesky.

    ``bandwidth`` defaults to the median heuristic. If the factorization
    fails the ridge is multiplied by 10, at most three times.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 1 or y.shape != (X.shape[0],):
        raise ValueError("need n >= 1 points with one real label each")
    if bandwidth is None:
        bandwidth = median_heuristic(X)
    if not bandwidth > 0 or not ridge > 0:
        raise ValueError("bandwidth and ridge must be positive")

    K = rbf_kernel(X, X, bandwidth)
    lam = ridge
    for attempt in range(4):
        try:
            factor = cho_factor(K + lam * np.eye(K.shape[0]), lower=True, check_finite=False)
            break
        except LinAlgError:
            if attempt == 3:
                raise
            log.warning("kernel ridge Cholesky failed at ridge=%g; retrying", lam)
            lam *= 10.0
    coef = cho_solve(factor, y, check_finite=False)
    return KernelRidgeModel(X, coef, float(bandwidth), float(lam))


def predict_kernel_ridge(model: KernelRidgeModel, x):
    return model.predict(x)


# ---------------------------------------------------------------------------
# softmax classifier


@dataclass(frozen=True, eq=False)
class SoftmaxModel:
    weights: np.ndarray  # (C, d)
    bias: np.ndarray  # (C,)

    @property
    def n_classes(self) -> int:
        return self.bias.size

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        logits = np.atleast_2d(X) @ self.weights.T + self.bias
        p = softmax(logits, axis=1)
        return p[0] if single else p


def softmax_loss_and_grad(params: np.ndarray, X: np.ndarray, y: np.ndarray, n_classes: int, l2: float = 0.0):
    """Mean cross-entropy; ``params`` is the flattened ``[W | b]`` of shape ``(C, d + 1)``."""
    d = X.shape[1]
    P = params.reshape(n_classes, d + 1)
    W, b = P[:, :d], P[:, d]
    logits = X @ W.T + b
    logp = log_softmax(logits, axis=1)
    n = X.shape[0]
    loss = -logp[np.arange(n), y].mean() + 0.5 * l2 * np.sum(W * W)
    R = np.exp(logp)
    R[np.arange(n), y] -= 1.0
    R /= n
    gW = R.T @ X + l2 * W
    gb = R.sum(axis=0)
    return float(loss), np.hstack([gW, gb[:, None]]).ravel()


def fit_softmax(X, y, n_classes: int, epochs: int = 500, lr: float = 0.5, seed: int = 0, l2: float = 1e-4) -> SoftmaxModel:
    """Multinomial logistic regression by full-batch gradient descent from zero.

    Zero initialization makes ``seed`` irrelevant; it is kept so all fitters
    share one signature.
    """
    del seed
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    missing = set(range(n_classes)) - set(np.unique(y).tolist())
    if missing:
        raise ValueError(f"classes {sorted(missing)} absent from training data")
    params = np.zeros(n_classes * (X.shape[1] + 1))
    loss, grad = softmax_loss_and_grad(params, X, y, n_classes, l2)
    for _ in range(epochs):
        trial = params - lr * grad
        trial_loss, trial_grad = softmax_loss_and_grad(trial, X, y, n_classes, l2)
        if trial_loss > loss:
            lr *= 0.5
            continue
        params, loss, grad = trial, trial_loss, trial_grad
    P = params.reshape(n_classes, X.shape[1] + 1)
    return SoftmaxModel(P[:, :-1].copy(), P[:, -1].copy())


def predict_softmax(model: SoftmaxModel, x):
    return model.predict_proba(x)
