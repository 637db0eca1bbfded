"""Synthetic multi-source generators with a shared conditional law of Y given X.

Every generator draws from ``make_rng(seed)``, a counter-based Philox stream,
so outputs are reproducible bit for bit given the seed and parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, softmax

from .core import DomainDataset, FeatureMap, Split
from .ratio import GaussianMixtureRatio, OracleGaussian

TARGET = 0  # domain id used for the target population


def make_rng(*keys) -> np.random.Generator:
    """Generator for an integer seed or a tuple of keys, e.g. ``(master, replication)``."""
    flat = []
    for k in keys:
        flat.extend(k if isinstance(k, (tuple, list)) else [k])
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in flat])))


def _pack(X, y, domain_id, labeled, n_classes=None) -> DomainDataset:
    if labeled:
        return DomainDataset.labeled(X, y, domain_id=domain_id, split=Split.CALIBRATION, n_classes=n_classes)
    return DomainDataset.unlabeled(X, domain_id=domain_id)


# ---------------------------------------------------------------------------
# multi-source regression


@dataclass(frozen=True, eq=False)
class RegressionDesign:
    """Sources ``N(mu_k, sigma_k^2 I)``, target ``N(0, target_var I)``."""

    d: int
    K: int
    sigma_h_sq: float
    mu: np.ndarray  # (K, d)
    sigma: np.ndarray  # (K,)
    target_var: float = 0.5

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(self.K, self.d)
        sigma = np.asarray(self.sigma, dtype=float).reshape(self.K)
        if np.any(sigma < 0.5) or np.any(sigma > 1.0):
            raise ValueError("source scales must lie in [0.5, 1]")
        if np.any(np.abs(mu) > 1.0):
            raise ValueError("source mean entries must lie in [-1, 1]")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def source_ratio(self, k: int) -> OracleGaussian:
        """Exact ``dQ/dP_k`` for source ``k`` in ``1..K``."""
        return OracleGaussian(self.mu[k - 1], self.sigma[k - 1] ** 2, np.zeros(self.d), self.target_var)

    def source_ratios(self) -> list[OracleGaussian]:
        return [self.source_ratio(k) for k in range(1, self.K + 1)]


def sample_domain_params(d: int, K: int, seed):
    """Means uniform on ``[-1, 1]^d`` and scales uniform on ``[0.5, 1]``."""
    if d < 1 or K < 1:
        raise ValueError("d and K must be >= 1")
    rng = make_rng(seed)
    mu = rng.uniform(-1.0, 1.0, size=(K, d))
    sigma = rng.uniform(0.5, 1.0, size=K)
    return mu, sigma


def make_regression_design(d: int, K: int, sigma_h_sq: float, seed) -> RegressionDesign:
    mu, sigma = sample_domain_params(d, K, seed)
    return RegressionDesign(d, K, sigma_h_sq, mu, sigma)


def regression_mean(X: np.ndarray) -> np.ndarray:
    return expit(-np.abs(X[:, 0]) / 2) * expit(-np.abs(X[:, 1]) / 2)


def regression_noise_scale(X: np.ndarray, sigma_h_sq: float) -> np.ndarray:
    return 1.0 + sigma_h_sq / (1.0 + np.linalg.norm(X, axis=1))


def regression_response(X: np.ndarray, sigma_h_sq: float, rng: np.random.Generator) -> np.ndarray:
    """The one conditional law shared by every domain."""
    return regression_mean(X) + regression_noise_scale(X, sigma_h_sq) * rng.standard_normal(X.shape[0])


def _regression_covariates(design: RegressionDesign, domain: int, m: int, rng) -> np.ndarray:
    if domain == TARGET:
        return np.sqrt(design.target_var) * rng.standard_normal((m, design.d))
    if not 1 <= domain <= design.K:
        raise ValueError(f"domain must be {TARGET} (target) or in 1..{design.K}")
    return design.mu[domain - 1] + design.sigma[domain - 1] * rng.standard_normal((m, design.d))


def gen_regression_sample(design: RegressionDesign, domain: int, m: int, seed, labeled: bool = True) -> DomainDataset:
    """``m`` draws from source ``domain`` (1..K) or the target (``TARGET``)."""
    if design.d < 2:
        raise ValueError("the regression mean uses two coordinates; need d >= 2")
    rng = make_rng(seed)
    X = _regression_covariates(design, domain, m, rng)
    y = regression_response(X, design.sigma_h_sq, rng) if labeled else None
    return _pack(X, y, domain, labeled)


def source_sizes(d: int, K: int) -> list[int]:
    """Per-source sample sizes: ``[100, 100, 100, 100, 1000] * floor(d / 2)``.

    For ``K = 10`` the five-source pattern is repeated twice.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    base = [100, 100, 100, 100, 1000]
    if K == 5:
        pattern = base
    elif K == 10:
        pattern = base * 2
    else:
        raise ValueError("source sizes are only defined for K in {5, 10}; pass explicit sizes")
    return [s * (d // 2) for s in pattern]


def gen_hierarchical(design: RegressionDesign, tau, n: int, seed):
    """Two-stage draws: domain ``k ~ Multinomial(tau)``, then ``(X, Y)`` from domain ``k``.

    Returns ``(domain_ids, X, y)`` with domain ids in ``1..K``.
    """
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (design.K,) or np.any(tau <= 0) or abs(tau.sum() - 1) > 1e-9:
        raise ValueError("tau must be a positive simplex over the K sources")
    rng = make_rng(seed)
    ids = rng.choice(design.K, size=n, p=tau) + 1
    X = design.mu[ids - 1] + design.sigma[ids - 1, None] * rng.standard_normal((n, design.d))
    y = regression_response(X, design.sigma_h_sq, rng)
    return ids, X, y


# ---------------------------------------------------------------------------
# one-dimensional shift study


@dataclass(frozen=True)
class Figure1Design:
    """Source ``N(mu, 9)``, target ``N(0, 9)``, ``Y | X ~ N(sigmoid(X), 0.01)``."""

    mu: float
    n: int
    target_var: float = 9.0
    noise_var: float = 0.01

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 <= self.mu <= 6.0:
            raise ValueError("mu must lie in [0, 6]")

    def ratio(self) -> OracleGaussian:
        return OracleGaussian([self.mu], self.target_var, [0.0], self.target_var)


def figure1_response(X: np.ndarray, noise_var: float, rng) -> np.ndarray:
    return expit(X[:, 0]) + np.sqrt(noise_var) * rng.standard_normal(X.shape[0])


def gen_figure1_sample(design: Figure1Design, role: str, m: int, seed, labeled: bool = True) -> DomainDataset:
    if m < 1:
        raise ValueError("m must be >= 1")
    if role not in ("source", "target"):
        raise ValueError("role must be 'source' or 'target'")
    rng = make_rng(seed)
    center = design.mu if role == "source" else 0.0
    X = center + np.sqrt(design.target_var) * rng.standard_normal((m, 1))
    y = figure1_response(X, design.noise_var, rng) if labeled else None
    return _pack(X, y, 1 if role == "source" else TARGET, labeled)


# ---------------------------------------------------------------------------
# latent-space classification


@dataclass(frozen=True, eq=False)
class ClassificationDesign:
    """Class-centered unit-variance Gaussians in a ``C``-dimensional latent space.

    Each domain mixes the class components with its own proportions; labels
    are drawn from one shared posterior, so ``P(Y | Z)`` is the same everywhere.
    With ``embedding`` set, observed inputs are ``Z @ embedding.T`` and
    :attr:`feature_map` recovers ``Z``.
    """

    centers: np.ndarray  # (C, C)
    source_props: np.ndarray  # (K, C)
    target_props: np.ndarray  # (C,)
    embedding: np.ndarray | None = None  # (raw_dim, C), orthonormal columns

    @property
    def K(self) -> int:
        return self.source_props.shape[0]

    @property
    def C(self) -> int:
        return self.centers.shape[0]

    @property
    def feature_map(self) -> FeatureMap:
        if self.embedding is None:
            return FeatureMap.identity()
        return FeatureMap.affine(self.embedding.T)

    def source_ratio(self, k: int) -> GaussianMixtureRatio:
        return GaussianMixtureRatio(self.centers, 1.0, self.source_props[k - 1], self.target_props)

    def source_ratios(self) -> list[GaussianMixtureRatio]:
        return [self.source_ratio(k) for k in range(1, self.K + 1)]


def class_posterior(design: ClassificationDesign, Z: np.ndarray) -> np.ndarray:
    """``P(Y = c | Z)`` under equal class weights; shared by all domains."""
    sq = ((Z[:, None, :] - design.centers[None, :, :]) ** 2).sum(axis=2)
    return softmax(-0.5 * sq, axis=1)


def draw_labels(design: ClassificationDesign, Z: np.ndarray, rng) -> np.ndarray:
    post = class_posterior(design, Z)
    u = rng.random(Z.shape[0])[:, None]
    return np.minimum((post.cumsum(axis=1) < u).sum(axis=1), design.C - 1)


def make_classification_design(K: int, C: int, separation: float, seed, shift: bool = True, concentration: float = 1.0, raw_dim: int | None = None) -> ClassificationDesign:
    """Class centers on a regular simplex of radius ``separation``.

    With ``shift`` each source and the target draw Dirichlet class proportions;
    without it all domains use uniform proportions.
    """
    if K < 2 or C < 2:
        raise ValueError("need K >= 2 and C >= 2")
    rng = make_rng(seed)
    centers = separation * (np.eye(C) - 1.0 / C) * np.sqrt(C / (C - 1))
    if shift:
        props = rng.dirichlet(np.full(C, concentration), size=K + 1)
        # keep every class present in every domain
        props = 0.9 * props + 0.1 / C
        source_props, target_props = props[:K], props[K]
    else:
        source_props = np.full((K, C), 1.0 / C)
        target_props = np.full(C, 1.0 / C)
    embedding = None
    if raw_dim is not None:
        if raw_dim < C:
            raise ValueError("raw_dim must be >= C")
        embedding, _ = np.linalg.qr(rng.standard_normal((raw_dim, C)))
    return ClassificationDesign(centers, source_props, target_props, embedding)


def gen_classification_sample(design: ClassificationDesign, domain: int, m: int, seed, labeled: bool = True) -> DomainDataset:
    rng = make_rng(seed)
    props = design.target_props if domain == TARGET else design.source_props[domain - 1]
    comp = rng.choice(design.C, size=m, p=props)
    Z = design.centers[comp] + rng.standard_normal((m, design.C))
    y = draw_labels(design, Z, rng) if labeled else None
    X = Z if design.embedding is None else Z @ design.embedding.T
    return _pack(X, y, domain, labeled, n_classes=design.C)


def gen_classification_latent(K: int, C: int, separation: float, m: int, seed, shift: bool = True, **kwargs):
    """Design plus ``m`` labeled draws from each source and from the target."""
    design = make_classification_design(K, C, separation, (seed, 0), shift=shift, **kwargs)
    sources = [gen_classification_sample(design, k, m, (seed, k)) for k in range(1, K + 1)]
    target = gen_classification_sample(design, TARGET, m, (seed, K + 1))
    return design, sources, target
