import numpy as np
import pytest

from mscp.harness.validate import relative_gradient_error
from mscp.models import (
    fit_kernel_ridge,
    fit_softmax,
    median_heuristic,
    predict_kernel_ridge,
    predict_softmax,
    rbf_kernel,
    softmax_loss_and_grad,
)


def test_single_point_shrinks_by_ridge():
    m = fit_kernel_ridge(np.array([[0.3, 0.1]]), np.array([2.0]), ridge=0.5)
    assert predict_kernel_ridge(m, np.array([0.3, 0.1])) == pytest.approx(2.0 / 1.5)
    m = fit_kernel_ridge(np.array([[0.3, 0.1]]), np.array([2.0]), ridge=1e-10)
    assert m(np.array([0.3, 0.1])) == pytest.approx(2.0, rel=1e-9)


def test_constant_labels_inside_hull():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(40, 2))
    c, ridge = 3.0, 1e-2
    m = fit_kernel_ridge(X, np.full(40, c), ridge=ridge)
    # reference: direct dense solve
    K = rbf_kernel(X, X, m.bandwidth)
    coef = np.linalg.solve(K + ridge * np.eye(40), np.full(40, c))
    q = rng.uniform(-0.5, 0.5, size=(10, 2))
    np.testing.assert_allclose(m(q), rbf_kernel(q, X, m.bandwidth) @ coef, rtol=1e-8)
    assert np.all(np.abs(m(q) - c) <= abs(c) * ridge * 40)


def test_duplicates_and_interpolation():
    X = np.array([[0.0], [0.0], [1.0]])
    m = fit_kernel_ridge(X, np.array([1.0, 1.0, 2.0]))
    assert np.all(np.isfinite(m.dual_coefficients))
    Xs = np.arange(8.0)[:, None] * 3.0
    ys = np.sin(Xs[:, 0])
    m = fit_kernel_ridge(Xs, ys, bandwidth=1.0, ridge=1e-10)
    np.testing.assert_allclose(m(Xs), ys, atol=1e-4)


def test_far_and_symmetric_predictions():
    X = np.array([[-1.0], [1.0]])
    m = fit_kernel_ridge(X, np.array([1.0, 1.0]), bandwidth=1.0)
    assert abs(m(np.array([100.0]))) < 1e-12
    assert m(np.array([0.4])) == pytest.approx(m(np.array([-0.4])), rel=1e-14)


def test_median_heuristic_and_validation():
    assert median_heuristic(np.zeros((1, 2))) == 1.0
    assert median_heuristic(np.zeros((3, 2))) == 1.0
    assert median_heuristic(np.array([[0.0], [1.0], [3.0]])) == 2.0
    with pytest.raises(ValueError):
        fit_kernel_ridge(np.zeros((2, 1)), np.zeros(3))
    with pytest.raises(ValueError):
        fit_kernel_ridge(np.zeros((2, 1)), np.zeros(2), ridge=0.0)


def test_softmax_zero_epochs_uniform():
    X = np.random.default_rng(0).normal(size=(9, 2))
    m = fit_softmax(X, np.arange(9) % 3, 3, epochs=0)
    np.testing.assert_allclose(predict_softmax(m, X), 1 / 3)


def test_softmax_separable_accuracy():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(-2, 0.5, (50, 2)), rng.normal(2, 0.5, (50, 2))])
    y = np.repeat([0, 1], 50)
    m = fit_softmax(X, y, 2)
    P = m.predict_proba(X)
    assert (P.argmax(axis=1) == y).mean() >= 0.95
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)
    assert m.predict_proba(X[0]).shape == (2,)


def test_softmax_missing_class_rejected():
    with pytest.raises(ValueError):
        fit_softmax(np.zeros((4, 1)), np.array([0, 0, 1, 1]), 3)


def test_softmax_gradient():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(25, 3))
    y = rng.integers(0, 4, size=25)
    for _ in range(10):
        assert relative_gradient_error(lambda p: softmax_loss_and_grad(p, X, y, 4, 1e-4), rng.normal(size=16)) <= 1e-6


def test_fits_are_deterministic():
    rng = np.random.default_rng(3)
    X, y = rng.normal(size=(30, 2)), rng.normal(size=30)
    np.testing.assert_array_equal(fit_kernel_ridge(X, y).dual_coefficients, fit_kernel_ridge(X, y).dual_coefficients)
    lab = np.arange(30) % 3
    np.testing.assert_array_equal(fit_softmax(X, lab, 3, seed=1).weights, fit_softmax(X, lab, 3, seed=2).weights)
