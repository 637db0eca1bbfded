import inspect

import numpy as np
import pytest

from mscp import datagen
from mscp.datagen import (
    TARGET,
    Figure1Design,
    RegressionDesign,
    class_posterior,
    gen_classification_latent,
    gen_classification_sample,
    gen_figure1_sample,
    gen_hierarchical,
    gen_regression_sample,
    make_classification_design,
    make_regression_design,
    regression_mean,
    regression_noise_scale,
    sample_domain_params,
    source_sizes,
)
from mscp.models import fit_softmax


def test_domain_params_ranges_and_reproducibility():
    mu, sigma = sample_domain_params(3, 50, seed=1)
    assert mu.shape == (50, 3) and sigma.shape == (50,)
    assert np.all(np.abs(mu) <= 1) and np.all((sigma >= 0.5) & (sigma <= 1))
    mu2, sigma2 = sample_domain_params(3, 50, seed=1)
    np.testing.assert_array_equal(mu, mu2)
    np.testing.assert_array_equal(sigma, sigma2)
    mu1, sigma1 = sample_domain_params(2, 1, seed=0)
    assert mu1.shape == (1, 2) and sigma1.shape == (1,)
    with pytest.raises(ValueError):
        sample_domain_params(0, 1, 0)


def test_design_box_is_enforced():
    with pytest.raises(ValueError):
        RegressionDesign(2, 1, 0.0, [[0.0, 0.0]], [0.4])
    with pytest.raises(ValueError):
        RegressionDesign(2, 1, 0.0, [[1.5, 0.0]], [0.7])


def test_regression_formulas():
    X = np.array([[0.0, 0.0], [1e9, -1e9], [3.0, 4.0]])
    assert regression_mean(X[:1])[0] == 0.25
    np.testing.assert_array_equal(regression_noise_scale(X, 0.0), 1.0)
    assert regression_noise_scale(X[1:2], 4.0)[0] == pytest.approx(1.0, abs=1e-8)
    assert regression_noise_scale(X[2:], 4.0)[0] == pytest.approx(1 + 4 / 6)


def test_regression_sample_roles():
    design = make_regression_design(2, 5, 4.0, seed=3)
    src = gen_regression_sample(design, 2, 50, seed=(1, 2))
    assert src.domain_id == 2 and src.is_labeled and src.X.shape == (50, 2)
    tgt = gen_regression_sample(design, TARGET, 20, seed=4, labeled=False)
    assert not tgt.is_labeled
    again = gen_regression_sample(design, 2, 50, seed=(1, 2))
    np.testing.assert_array_equal(src.X, again.X)
    np.testing.assert_array_equal(src.y, again.y)
    with pytest.raises(ValueError):
        gen_regression_sample(design, 6, 5, 0)
    with pytest.raises(ValueError):
        gen_regression_sample(make_regression_design(1, 2, 0.0, 0), 1, 5, 0)


def test_moments_match_design():
    m = 10_000
    design = RegressionDesign(2, 1, 0.0, [[0.5, -0.25]], [0.8])
    X = gen_regression_sample(design, 1, m, 7).X
    assert np.all(np.abs(X.mean(axis=0) - [0.5, -0.25]) <= 4 * 0.8 / np.sqrt(m))
    assert np.all(np.abs(X.std(axis=0) - 0.8) <= 4 * 0.8 / np.sqrt(2 * m))
    T = gen_regression_sample(design, TARGET, m, 8).X
    assert np.all(np.abs(T.mean(axis=0)) <= 4 * np.sqrt(0.5 / m))


@pytest.mark.parametrize(
    "d, K, want",
    [(2, 5, [100, 100, 100, 100, 1000]), (5, 5, [200, 200, 200, 200, 2000]), (10, 10, [500, 500, 500, 500, 5000] * 2)],
)
def test_source_sizes(d, K, want):
    assert source_sizes(d, K) == want


def test_source_sizes_errors():
    for d, K in ((2, 3), (1, 5)):
        with pytest.raises(ValueError):
            source_sizes(d, K)


def test_figure1_generator():
    design = Figure1Design(0.0, 10)
    a = gen_figure1_sample(design, "source", 5000, 1).X
    b = gen_figure1_sample(design, "target", 5000, 1).X
    np.testing.assert_array_equal(a, b)  # identical laws at mu = 0
    assert design.ratio()(np.array([2.0])) == 1.0
    shifted = gen_figure1_sample(Figure1Design(6.0, 10), "source", 10_000, 2)
    assert abs(shifted.X.mean() - 6.0) <= 4 * 3 / 100
    resid = shifted.y - 1 / (1 + np.exp(-shifted.X[:, 0]))
    assert abs(resid.std() - 0.1) <= 4 * 0.1 / np.sqrt(2 * 10_000)
    with pytest.raises(ValueError):
        Figure1Design(7.0, 10)
    with pytest.raises(ValueError):
        Figure1Design(1.0, 0)
    with pytest.raises(ValueError):
        gen_figure1_sample(design, "source", 0, 0)


def test_figure1_conditional_mean_at_zero():
    rng = np.random.default_rng(0)
    y = datagen.figure1_response(np.zeros((40_000, 1)), 0.01, rng)
    assert abs(y.mean() - 0.5) <= 4 * 0.1 / 200


def test_hierarchical_frequencies():
    design = make_regression_design(2, 5, 4.0, seed=0)
    tau = [0.1, 0.15, 0.2, 0.25, 0.3]
    ids, X, y = gen_hierarchical(design, tau, 20_000, seed=1)
    freq = np.bincount(ids, minlength=6)[1:] / 20_000
    assert np.all(np.abs(freq - tau) <= 4 * np.sqrt(0.25 / 20_000))
    with pytest.raises(ValueError):
        gen_hierarchical(design, [0.5, 0.5], 10, 0)


def test_classification_separation_zero_is_uninformative():
    design = make_classification_design(2, 4, 0.0, seed=0)
    z = np.random.default_rng(0).normal(size=(5, 4))
    np.testing.assert_allclose(class_posterior(design, z), 0.25)


def test_classification_without_shift_has_equal_proportions():
    design = make_classification_design(3, 4, 2.0, seed=0, shift=False)
    np.testing.assert_array_equal(design.source_props, 0.25)
    np.testing.assert_array_equal(design.target_props, 0.25)
    for r in design.source_ratios():
        np.testing.assert_allclose(r(np.random.default_rng(1).normal(size=(3, 4))), 1.0)


def test_large_separation_classifier_is_accurate():
    design, sources, target = gen_classification_latent(3, 3, 12.0, 300, seed=4)
    X = np.vstack([s.X for s in sources])
    y = np.concatenate([s.y for s in sources])
    model = fit_softmax(X, y, 3)
    assert (model.predict_proba(target.X).argmax(axis=1) == target.y).mean() >= 0.99


def test_embedding_feature_map_recovers_latent():
    design = make_classification_design(2, 3, 3.0, seed=5, raw_dim=6)
    data = gen_classification_sample(design, 1, 10, seed=6)
    assert data.X.shape == (10, 6)
    Z = design.feature_map(data.X)
    np.testing.assert_allclose(Z @ design.embedding.T, data.X, atol=1e-12)


def test_labels_come_from_one_shared_posterior():
    # the label path takes covariates only; no domain argument exists
    assert list(inspect.signature(datagen.draw_labels).parameters) == ["design", "Z", "rng"]
    assert list(inspect.signature(datagen.regression_response).parameters) == ["X", "sigma_h_sq", "rng"]


def test_classification_reproducible():
    a = gen_classification_latent(2, 3, 2.0, 20, seed=9)
    b = gen_classification_latent(2, 3, 2.0, 20, seed=9)
    np.testing.assert_array_equal(a[1][0].X, b[1][0].X)
    np.testing.assert_array_equal(a[2].y, b[2].y)
    with pytest.raises(ValueError):
        make_classification_design(1, 3, 1.0, 0)
