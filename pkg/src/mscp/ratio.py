"""Likelihood ratios ``dQ/dP``: closed-form Gaussian oracles and a logistic estimator.

Every ratio model is a callable taking one point ``(d,)`` or a batch ``(n, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .core import as_points

DEFAULT_CLIP = (1e-3, 1e3)


def _isotropic_logpdf(z: np.ndarray, mean: np.ndarray, var: float) -> np.ndarray:
    d = z.shape[1]
    sq = np.sum((z - mean) ** 2, axis=1)
    return -0.5 * sq / var - 0.5 * d * np.log(2 * np.pi * var)


@dataclass(frozen=True, eq=False)
class OracleGaussian:
    """Exact ratio ``N(z; mu_q, var_q I) / N(z; mu_p, var_p I)``."""

    mu_p: np.ndarray
    var_p: float
    mu_q: np.ndarray
    var_q: float

    def __post_init__(self):
        mu_p = np.atleast_1d(np.asarray(self.mu_p, dtype=float))
        mu_q = np.atleast_1d(np.asarray(self.mu_q, dtype=float))
        if mu_p.shape != mu_q.shape:
            raise ValueError("source and target means differ in dimension")
        if not (self.var_p > 0 and self.var_q > 0):
            raise ValueError("variances must be positive")
        object.__setattr__(self, "mu_p", mu_p)
        object.__setattr__(self, "mu_q", mu_q)

    @property
    def dim(self) -> int:
        return self.mu_p.size

    def log_ratio(self, z) -> np.ndarray:
        z, single = as_points(z, self.dim)
        out = _isotropic_logpdf(z, self.mu_q, self.var_q) - _isotropic_logpdf(z, self.mu_p, self.var_p)
        return out[0] if single else out

    def __call__(self, z):
        return np.exp(self.log_ratio(z))


@dataclass(frozen=True, eq=False)
class GaussianMixtureRatio:
    """Exact ratio between two isotropic Gaussian mixtures sharing components.

    Components ``N(means[c], variances[c] I)`` are weighted by
    ``target_weights`` under Q and ``source_weights`` under P.
    """

    means: np.ndarray
    variances: np.ndarray
    source_weights: np.ndarray
    target_weights: np.ndarray

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        variances = np.broadcast_to(np.asarray(self.variances, dtype=float), (means.shape[0],)).copy()
        ws = np.asarray(self.source_weights, dtype=float)
        wt = np.asarray(self.target_weights, dtype=float)
        for w in (ws, wt):
            if w.shape != (means.shape[0],) or np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
                raise ValueError("mixture weights must be a simplex over the components")
        if np.any(variances <= 0):
            raise ValueError("variances must be positive")
        for name, val in (("means", means), ("variances", variances), ("source_weights", ws), ("target_weights", wt)):
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def _component_logpdf(self, z):
        return np.stack(
            [_isotropic_logpdf(z, m, v) for m, v in zip(self.means, self.variances)], axis=1
        )

    def log_ratio(self, z):
        z, single = as_points(z, self.dim)
        comp = self._component_logpdf(z)
        with np.errstate(divide="ignore"):
            out = logsumexp(comp, axis=1, b=self.target_weights) - logsumexp(comp, axis=1, b=self.source_weights)
        return out[0] if single else out

    def __call__(self, z):
        return np.exp(self.log_ratio(z))


# ---------------------------------------------------------------------------
# logistic-regression estimator


def ratio_features(Z: np.ndarray, kind: str) -> np.ndarray:
    """Raw coordinates, or coordinates plus all degree-2 monomials."""
    if kind == "linear":
        return Z
    if kind == "quadratic":
        iu = np.triu_indices(Z.shape[1])
        return np.hstack([Z, (Z[:, :, None] * Z[:, None, :])[:, iu[0], iu[1]]])
    raise ValueError(f"unknown feature kind {kind!r}")


@dataclass(frozen=True, eq=False)
class LogisticRatio:
    """Ratio from a source-vs-target logistic classifier.

    ``w(z) = clip(prior_correction * exp(a(z)))`` with ``a`` the affine score on
    standardized features and ``prior_correction = n_source / n_target``.
    """

    weights: np.ndarray
    bias: float
    prior_correction: float
    clip: tuple[float, float] = DEFAULT_CLIP
    features: str = "linear"
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None
    dim: int = 1

    def __post_init__(self):
        lo, hi = self.clip
        if not 0 < lo <= hi:
            raise ValueError("clip bounds must satisfy 0 < w_min <= w_max")

    def score(self, z) -> np.ndarray:
        z, single = as_points(z, self.dim)
        F = ratio_features(z, self.features)
        if self.feature_mean is not None:
            F = (F - self.feature_mean) / self.feature_scale
        a = F @ self.weights + self.bias
        return a[0] if single else a

    def __call__(self, z):
        a = self.score(z)
        # sigma(a) / (1 - sigma(a)) = exp(a); clip in log space so nothing overflows
        lo, hi = self.clip
        log_w = np.log(self.prior_correction) + a
        w = np.exp(np.clip(log_w, np.log(lo), np.log(hi)))
        # saturated points return the bounds exactly, not exp(log(bound))
        w = np.where(log_w >= np.log(hi), hi, np.where(log_w <= np.log(lo), lo, w))
        return float(w) if w.ndim == 0 else w


def logistic_loss_and_grad(params: np.ndarray, F: np.ndarray, y: np.ndarray, l2: float):
    """Mean cross-entropy plus ``l2/2 * |w|^2``; ``params = [w..., b]``."""
    w, b = params[:-1], params[-1]
    a = F @ w + b
    loss = np.mean(np.logaddexp(0.0, a) - y * a) + 0.5 * l2 * (w @ w)
    r = (expit(a) - y) / F.shape[0]
    grad = np.concatenate([F.T @ r + l2 * w, [r.sum()]])
    return float(loss), grad


def fit_logistic_ratio(
    source_features,
    target_features,
    epochs: int = 500,
    learning_rate: float = 0.1,
    seed: int = 0,
    *,
    l2: float = 1e-4,
    features: str = "linear",
    clip=DEFAULT_CLIP,
    return_history: bool = False,
):
    """Fit source (class 0) vs target (class 1) by full-batch gradient descent.

    Parameters start at zero, so ``seed`` has no effect on the result; it is
    accepted for interface symmetry with the other fitters. A step that would
    raise the loss is rejected and the learning rate halved, so the recorded
    loss never increases.
    """
    del seed
    Xs = np.asarray(source_features, dtype=float)
    Xt = np.asarray(target_features, dtype=float)
    Xs = Xs[:, None] if Xs.ndim == 1 else Xs
    Xt = Xt[:, None] if Xt.ndim == 1 else Xt
    if Xs.shape[0] == 0 or Xt.shape[0] == 0:
        raise ValueError("both classes need at least one sample")
    if Xs.shape[1] != Xt.shape[1]:
        raise ValueError("source and target features differ in dimension")
    dim = Xs.shape[1]

    F = ratio_features(np.vstack([Xs, Xt]), features)
    y = np.concatenate([np.zeros(Xs.shape[0]), np.ones(Xt.shape[0])])
    mean = F.mean(axis=0)
    scale = F.std(axis=0)
    scale[scale == 0] = 1.0
    F = (F - mean) / scale

    params = np.zeros(F.shape[1] + 1)
    loss, grad = logistic_loss_and_grad(params, F, y, l2)
    history = [loss]
    lr = learning_rate
    for _ in range(epochs):
        for _halving in range(60):
            trial = params - lr * grad
            trial_loss, trial_grad = logistic_loss_and_grad(trial, F, y, l2)
            if np.isnan(trial_loss):
                raise FloatingPointError("logistic ratio fit produced a NaN loss")
            if trial_loss <= loss:
                break
            lr *= 0.5
        else:
            break  # no decreasing step at machine precision: converged
        params, loss, grad = trial, trial_loss, trial_grad
        history.append(loss)

    model = LogisticRatio(
        weights=params[:-1].copy(),
        bias=float(params[-1]),
        prior_correction=Xs.shape[0] / Xt.shape[0],
        clip=tuple(clip),
        features=features,
        feature_mean=mean,
        feature_scale=scale,
        dim=dim,
    )
    return (model, history) if return_history else model


def eval_ratio(model, z):
    """Evaluate any ratio model at one point or a batch of points."""
    return model(z)


def balanced_target_subsample(target_features, k: int, seed: int) -> np.ndarray:
    """``k`` distinct target rows drawn uniformly without replacement."""
    target = np.asarray(target_features)
    if not 1 <= k <= target.shape[0]:
        raise ValueError(f"k must lie in [1, {target.shape[0]}], got {k}")
    idx = np.random.default_rng(seed).choice(target.shape[0], size=k, replace=False)
    return target[idx]
