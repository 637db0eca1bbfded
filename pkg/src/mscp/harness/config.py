"""JSON experiment configuration and method-name parsing."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields
from fractions import Fraction

from ..merge import BonferroniMin, GammaVote, TwiceMean


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


TASKS = ("figure1", "regression", "classification")


# ---------------------------------------------------------------------------
# methods


@dataclass(frozen=True)
class Method:
    """A parsed method name.

    ``kind`` is one of ``CP``, ``WCP``, ``PooledWCP``, ``MergedVote`` or
    ``MergedPvalue``. ``gamma`` is a fraction, or ``None`` for the
    ``(K-1)/K`` rule, which is resolved once ``K`` is known.
    """

    name: str
    kind: str
    gamma: Fraction | None = None
    rule: str | None = None

    def vote_rule(self, K: int) -> GammaVote:
        gamma = Fraction(K - 1, K) if self.gamma is None else self.gamma
        return GammaVote(float(gamma))

    def merging_rule(self, K: int):
        if self.rule == "BonferroniMin":
            return BonferroniMin()
        if self.rule == "TwiceMean":
            return TwiceMean()
        return self.vote_rule(K)


_GAMMA = r"\(K-1\)/K|\d+(?:\.\d+)?(?:/\d+)?"
_VOTE = re.compile(rf"MergedVote\(({_GAMMA})\)")
_PVAL = re.compile(rf"MergedPvalue\((BonferroniMin|TwiceMean|GammaVote:({_GAMMA}))\)")


def _parse_gamma(text: str, name: str) -> Fraction | None:
    if text == "(K-1)/K":
        return None
    g = Fraction(text)
    if not 0 <= g < 1:
        raise ConfigError(f"{name}: gamma must lie in [0, 1)")
    return g


def parse_method(name: str) -> Method:
    name = name.replace(" ", "")
    if name in ("CP", "WCP", "PooledWCP"):
        return Method(name, name)
    m = _VOTE.fullmatch(name)
    if m:
        return Method(name, "MergedVote", gamma=_parse_gamma(m.group(1), name))
    m = _PVAL.fullmatch(name)
    if m:
        if m.group(2) is None:
            return Method(name, "MergedPvalue", rule=m.group(1))
        gamma = _parse_gamma(m.group(2), name)
        if gamma == 0:
            raise ConfigError(f"{name}: the gamma-vote merging function needs gamma > 0")
        return Method(name, "MergedPvalue", gamma=gamma, rule="GammaVote")
    raise ConfigError(f"unknown method {name!r}")


# ---------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment; list-valued grid fields are crossed into grid points.

    Grids: ``mu`` and ``n`` for figure1; ``sigma_h_sq``, ``K`` and ``d`` for
    regression; ``K``, ``C`` and ``separation`` for classification.
    """

    task: str
    methods: tuple[str, ...]
    alpha: float = 0.1
    replications: int = 300
    seed: int = 0
    ratio_mode: str = "oracle"
    # regression / classification
    K: tuple[int, ...] = (5,)
    d: tuple[int, ...] = (2,)
    sigma_h_sq: tuple[float, ...] = (4.0,)
    source_sizes: tuple[int, ...] | None = None
    identical_sources: bool = False
    C: tuple[int, ...] = (4,)
    separation: tuple[float, ...] = (3.0,)
    shift: bool = True
    m_per_domain: int = 400
    # figure1
    mu: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0)
    n: tuple[int, ...] = (10, 50)
    train_size: int = 200
    # ratio estimation
    logistic_features: str = "quadratic"
    logistic_epochs: int = 500
    logistic_learning_rate: float = 0.1
    # output
    report_runtime: bool = False
    out_csv: str | None = None
    out_svg: str | None = None
    parsed_methods: tuple[Method, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}")
        if not self.methods:
            raise ConfigError("method list is empty")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.ratio_mode not in ("oracle", "logistic"):
            raise ConfigError("ratio_mode must be 'oracle' or 'logistic'")
        if self.logistic_features not in ("linear", "quadratic"):
            raise ConfigError("logistic_features must be 'linear' or 'quadratic'")
        parsed = tuple(parse_method(m) for m in self.methods)
        names = [m.name for m in parsed]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate method names")
        if self.task == "figure1":
            if any(m.kind not in ("CP", "WCP") for m in parsed):
                raise ConfigError("figure1 has one source; methods must be CP or WCP")
        elif any(m.kind == "WCP" for m in parsed):
            raise ConfigError("WCP is the single-source method; use PooledWCP or a merged method")
        if self.task == "regression" and min(self.d) < 2:
            raise ConfigError("regression needs d >= 2")
        if self.task == "figure1" and (min(self.n) < 1 or any(not 0 <= m <= 6 for m in self.mu)):
            raise ConfigError("figure1 needs n >= 1 and mu in [0, 6]")
        if self.source_sizes is not None:
            if len(self.K) != 1 or len(self.source_sizes) != self.K[0]:
                raise ConfigError("explicit source_sizes need a single K with one size per source")
            if min(self.source_sizes) < 2:
                raise ConfigError("every source needs at least two samples")
        elif self.task == "regression" and any(k not in (5, 10) for k in self.K):
            raise ConfigError("source sizes are only built in for K in {5, 10}; give source_sizes")
        if min(self.K) < 1 or (self.task == "classification" and (min(self.K) < 2 or min(self.C) < 2)):
            raise ConfigError("K and C out of range")
        object.__setattr__(self, "parsed_methods", parsed)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)} - {"parsed_methods"}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        for key in ("task", "methods"):
            if key not in raw:
                raise ConfigError(f"missing required key {key!r}")
        kw = dict(raw)
        for key in ("K", "d", "sigma_h_sq", "C", "separation", "mu", "n"):
            if key in kw:
                v = kw[key]
                kw[key] = tuple(v) if isinstance(v, list) else (v,)
                if not kw[key]:
                    raise ConfigError(f"{key} grid is empty")
        for key in ("methods", "source_sizes"):
            if kw.get(key) is not None:
                if not isinstance(kw[key], list):
                    raise ConfigError(f"{key} must be a list")
                kw[key] = tuple(kw[key])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)
