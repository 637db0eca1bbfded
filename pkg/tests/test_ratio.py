import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mscp.harness.validate import relative_gradient_error
from mscp.ratio import (
    DEFAULT_CLIP,
    GaussianMixtureRatio,
    LogisticRatio,
    OracleGaussian,
    balanced_target_subsample,
    eval_ratio,
    fit_logistic_ratio,
    logistic_loss_and_grad,
    ratio_features,
)


def test_oracle_examples():
    same = OracleGaussian([0.3, -0.2], 2.0, [0.3, -0.2], 2.0)
    np.testing.assert_allclose(same(np.random.default_rng(0).normal(size=(5, 2))), 1.0)
    assert OracleGaussian([0.0], 9.0, [0.0], 9.0)(np.array([3.7])) == 1.0
    # exp((0 - 6)^2 / 18 - 0) = e^2
    assert eval_ratio(OracleGaussian([6.0], 9.0, [0.0], 9.0), np.array([0.0])) == pytest.approx(math.exp(2.0), rel=1e-14)
    with pytest.raises(ValueError):
        OracleGaussian([0.0], 0.0, [0.0], 1.0)
    with pytest.raises(ValueError):
        OracleGaussian([0.0], 1.0, [0.0], 1.0)(np.zeros((2, 2)))


@pytest.mark.parametrize(
    "ratio, sampler",
    [
        (OracleGaussian([2.0], 9.0, [0.0], 9.0), lambda rng, m: 2.0 + 3.0 * rng.standard_normal((m, 1))),
        (OracleGaussian([0.5, -0.5], 1.0, [0.0, 0.0], 0.5), lambda rng, m: np.array([0.5, -0.5]) + rng.standard_normal((m, 2))),
    ],
)
def test_change_of_measure(ratio, sampler):
    rng = np.random.default_rng(11)
    w = ratio(sampler(rng, 10_000))
    assert abs(w.mean() - 1.0) <= 3 * w.std(ddof=1) / 100


def test_mixture_oracle_matches_direct_formula():
    centers = np.array([[1.0, 0.0], [-1.0, 0.0]])
    r = GaussianMixtureRatio(centers, 1.0, [0.8, 0.2], [0.3, 0.7])
    z = np.array([[0.2, 0.5], [-1.0, 1.0]])
    k = np.exp(-0.5 * ((z[:, None, :] - centers[None]) ** 2).sum(axis=2))
    np.testing.assert_allclose(r(z), (k @ [0.3, 0.7]) / (k @ [0.8, 0.2]), rtol=1e-12)


def test_features():
    Z = np.array([[1.0, 2.0]])
    np.testing.assert_array_equal(ratio_features(Z, "quadratic"), [[1.0, 2.0, 1.0, 2.0, 4.0]])
    with pytest.raises(ValueError):
        ratio_features(Z, "cubic")


def test_self_ratio_is_near_one():
    rng = np.random.default_rng(5)
    model = fit_logistic_ratio(rng.normal(size=2000), rng.normal(size=2000))
    assert 0.8 <= model(np.array([0.0])) <= 1.25


def test_quadratic_fit_tracks_gaussian_ratio():
    rng = np.random.default_rng(1)
    src = rng.normal(size=(3000, 2))
    tgt = np.sqrt(0.5) * rng.normal(size=(3000, 2))
    model = fit_logistic_ratio(src, tgt, features="quadratic", epochs=2000, learning_rate=1.0)
    oracle = OracleGaussian([0, 0], 1.0, [0, 0], 0.5)
    z = np.array([[0.0, 0.0], [0.5, 0.5], [1.0, 0.0]])
    np.testing.assert_allclose(np.log(model(z)), np.log(oracle(z)), atol=0.35)


def test_separated_classes_saturate_at_clip():
    src = np.linspace(-10, -5, 50)[:, None]
    tgt = np.linspace(5, 10, 50)[:, None]
    with np.errstate(all="raise"):
        model = fit_logistic_ratio(src, tgt, epochs=2000, learning_rate=5.0)
        w = model(np.array([[-1e6], [1e6]]))
    assert w[0] == pytest.approx(DEFAULT_CLIP[0]) and w[1] == pytest.approx(DEFAULT_CLIP[1])


def test_zero_epochs_is_prior_only():
    rng = np.random.default_rng(2)
    model = fit_logistic_ratio(rng.normal(size=(30, 2)), rng.normal(size=(10, 2)), epochs=0)
    np.testing.assert_array_equal(model.weights, 0.0)
    np.testing.assert_allclose(model(rng.normal(size=(4, 2))), 3.0)


def test_indifferent_classifier_is_one():
    m = LogisticRatio(np.zeros(1), 0.0, 1.0)
    assert m(np.array([0.3])) == 1.0
    huge = LogisticRatio(np.array([1e6]), 0.0, 1.0)
    assert huge(np.array([1.0])) == DEFAULT_CLIP[1]


def test_degenerate_inputs_fit():
    model = fit_logistic_ratio(np.ones((1, 2)), np.ones((3, 2)))
    assert np.all(np.isfinite(model.weights))
    with pytest.raises(ValueError):
        fit_logistic_ratio(np.ones((0, 2)), np.ones((3, 2)))
    with pytest.raises(ValueError):
        fit_logistic_ratio(np.ones((2, 2)), np.ones((3, 1)))
    with pytest.raises(ValueError):
        LogisticRatio(np.zeros(1), 0.0, 1.0, clip=(2.0, 1.0))


def test_loss_never_increases():
    rng = np.random.default_rng(3)
    for features in ("linear", "quadratic"):
        _, hist = fit_logistic_ratio(rng.normal(1, 1, (200, 2)), rng.normal(size=(100, 2)), features=features, return_history=True)
        assert all(b <= a for a, b in zip(hist, hist[1:]))
        assert hist[-1] < hist[0]


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_fitted_ratio_positive_and_bounded(a, b):
    rng = np.random.default_rng(4)
    model = fit_logistic_ratio(rng.normal(0, 1, (100, 2)), rng.normal(2, 1, (80, 2)), features="quadratic", epochs=100)
    w = model(np.array([a, b]))
    assert DEFAULT_CLIP[0] <= w <= DEFAULT_CLIP[1]


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    F = rng.normal(size=(30, 4))
    y = (rng.random(30) < 0.5).astype(float)
    for _ in range(10):
        err = relative_gradient_error(lambda p: logistic_loss_and_grad(p, F, y, 1e-4), rng.normal(size=5))
        assert err <= 1e-6


def test_balanced_subsample():
    T = np.arange(20.0)[:, None]
    full = balanced_target_subsample(T, 20, 1)
    np.testing.assert_array_equal(np.sort(full[:, 0]), T[:, 0])
    a = balanced_target_subsample(T, 5, 9)
    np.testing.assert_array_equal(a, balanced_target_subsample(T, 5, 9))
    assert len(np.unique(a)) == 5
    for k in (0, 21):
        with pytest.raises(ValueError):
            balanced_target_subsample(T, k, 0)
