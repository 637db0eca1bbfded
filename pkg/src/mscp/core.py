"""Shared data containers, nonconformity scores and splitting utilities."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Split(enum.Enum):
    TRAIN = "train"
    CALIBRATION = "calibration"
    UNLABELED = "unlabeled"


class UnlabeledAccessError(RuntimeError):
    """Raised when code tries to read labels of an unlabeled dataset."""


@dataclass(frozen=True, eq=False)
class DomainDataset:
    """Samples from one domain, stored row-wise.

    ``X`` has shape ``(n, d)``. ``y`` is a float vector for regression or an
    integer vector of class indices when ``n_classes`` is set. Unlabeled
    datasets hold no labels and raise on access to ``y``.
    """

    X: np.ndarray
    _y: np.ndarray | None
    domain_id: int = 0
    split: Split = Split.CALIBRATION
    n_classes: int | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError(f"X must be 2-d with at least one column, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("covariates must be finite")
        object.__setattr__(self, "X", X)
        X.setflags(write=False)

        if self.split is Split.UNLABELED:
            if self._y is not None:
                raise ValueError("unlabeled datasets must not carry labels")
            return
        if self._y is None:
            raise ValueError(f"{self.split.value} dataset requires labels")
        if self.n_classes is None:
            y = np.asarray(self._y, dtype=float)
        else:
            y = np.asarray(self._y)
            if not np.issubdtype(y.dtype, np.integer):
                raise ValueError("class labels must be integers")
            if y.size and (y.min() < 0 or y.max() >= self.n_classes):
                raise ValueError(f"class labels must lie in [0, {self.n_classes})")
        if y.shape != (X.shape[0],):
            raise ValueError(f"label shape {y.shape} does not match {X.shape[0]} rows")
        y.setflags(write=False)
        object.__setattr__(self, "_y", y)

    @classmethod
    def labeled(cls, X, y, domain_id=0, split=Split.CALIBRATION, n_classes=None):
        return cls(X, y, domain_id=domain_id, split=split, n_classes=n_classes)

    @classmethod
    def unlabeled(cls, X, domain_id=0):
        return cls(X, None, domain_id=domain_id, split=Split.UNLABELED)

    @property
    def y(self) -> np.ndarray:
        if self._y is None:
            raise UnlabeledAccessError(
                f"labels of unlabeled dataset (domain {self.domain_id}) must not be read"
            )
        return self._y

    @property
    def is_labeled(self) -> bool:
        return self._y is not None

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, idx, split: Split | None = None) -> "DomainDataset":
        idx = np.asarray(idx, dtype=int)
        return DomainDataset(
            self.X[idx],
            None if self._y is None else self._y[idx],
            domain_id=self.domain_id,
            split=self.split if split is None else split,
            n_classes=self.n_classes,
        )


def as_points(z, dim: int):
    """Coerce one point or a batch to shape ``(n, dim)``; also report if it was one point."""
    z = np.asarray(z, dtype=float)
    single = False
    if z.ndim == 0:
        z, single = z.reshape(1, 1), True
    elif z.ndim == 1:
        # a 1-d array is one point, except a vector of scalars in one dimension
        if dim == 1 and z.size != 1:
            z = z[:, None]
        else:
            z, single = z[None, :], True
    if z.ndim != 2 or z.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {z.shape}")
    return z, single


def score_abs_residual(prediction, y):
    """Absolute residual ``|y - prediction|``; works elementwise on arrays."""
    prediction = np.asarray(prediction, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(prediction)) and np.all(np.isfinite(y))):
        raise ValueError("prediction and response must be finite")
    out = np.abs(y - prediction)
    return float(out) if out.ndim == 0 else out


def _check_simplex(probs: np.ndarray) -> None:
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("probabilities must be finite and nonnegative")
    if np.any(np.abs(probs.sum(axis=-1) - 1.0) > 1e-9):
        raise ValueError("probabilities must sum to 1 within 1e-9")


def score_one_minus_prob(probs, y):
    """``1 - probs[y]`` for a probability vector, or row-wise for a matrix."""
    probs = np.asarray(probs, dtype=float)
    _check_simplex(probs)
    n_classes = probs.shape[-1]
    y = np.asarray(y)
    if not np.issubdtype(y.dtype, np.integer):
        raise ValueError("class index must be an integer")
    if np.any(y < 0) or np.any(y >= n_classes):
        raise ValueError(f"class index out of range [0, {n_classes})")
    if probs.ndim == 1:
        return float(1.0 - probs[int(y)])
    return 1.0 - probs[np.arange(probs.shape[0]), y]


def split_dataset(data: DomainDataset, train_fraction: float, seed: int):
    """Shuffle and split into ``(train, calibration)``.

    The training part gets ``round(train_fraction * n)`` samples, rounding
    halves up.
    """
    n = len(data)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    if n < 2:
        raise ValueError("need at least two samples to split")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = int(np.floor(train_fraction * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    split_as = Split.TRAIN if data.is_labeled else Split.UNLABELED
    cal_as = Split.CALIBRATION if data.is_labeled else Split.UNLABELED
    return data.subset(perm[:n_train], split_as), data.subset(perm[n_train:], cal_as)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Representation map applied before ratios and predictors.

    With no matrix this is the identity; otherwise ``z = x @ matrix.T + offset``.
    """

    matrix: np.ndarray | None = None
    offset: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.matrix is None:
            if self.offset is not None:
                raise ValueError("identity map takes no offset")
            return
        A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        b = np.zeros(A.shape[0]) if self.offset is None else np.asarray(self.offset, dtype=float)
        if A.shape[0] < 1 or b.shape != (A.shape[0],):
            raise ValueError("affine map needs output dimension >= 1 and matching offset")
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "offset", b)

    @classmethod
    def identity(cls) -> "FeatureMap":
        return cls()

    @classmethod
    def affine(cls, matrix, offset=None) -> "FeatureMap":
        return cls(matrix, offset)

    @property
    def is_identity(self) -> bool:
        return self.matrix is None

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.matrix is None:
            return X
        if X.shape[-1] != self.matrix.shape[1]:
            raise ValueError(f"expected inputs of dimension {self.matrix.shape[1]}")
        return X @ self.matrix.T + self.offset
