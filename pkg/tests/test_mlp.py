"""
单隐层神经网络测试
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.dataset import Dataset
from core.errors import DataError
from core.mlp import fit_mlp, loss_and_gradient, pack


def test_zero_iterations_predict_mean(small_data):
    model = fit_mlp(small_data, {'max_iter': 0, 'seed': 1})
    assert_allclose(model.predict(small_data.features), np.mean(small_data.response))
    assert model.n_iter == 0


def test_gradient_matches_finite_differences():
    gen = np.random.default_rng(0)
    hidden, p = 4, 3
    Z = gen.standard_normal((7, p))
    yc = gen.standard_normal(7)
    theta = pack(gen.standard_normal((hidden, p)), gen.standard_normal(hidden),
                 gen.standard_normal(hidden), 0.3)
    _, grad = loss_and_gradient(theta, Z, yc, hidden, l2_decay=0.01)
    numeric = np.empty_like(theta)
    eps = 1e-6
    for k in range(theta.size):
        step = np.zeros_like(theta)
        step[k] = eps
        plus, _ = loss_and_gradient(theta + step, Z, yc, hidden, 0.01)
        minus, _ = loss_and_gradient(theta - step, Z, yc, hidden, 0.01)
        numeric[k] = (plus - minus) / (2 * eps)
    assert_allclose(grad, numeric, rtol=1e-4, atol=1e-7)


def test_training_reduces_loss(small_data):
    model = fit_mlp(small_data, {'max_iter': 500, 'seed': 2})
    centered = small_data.response - small_data.response.mean()
    assert model.final_loss < 0.5 * np.mean(centered ** 2)
    assert model.n_iter > 0


def test_seed_determines_network(small_data):
    a = fit_mlp(small_data, {'max_iter': 50, 'seed': 3})
    b = fit_mlp(small_data, {'max_iter': 50, 'seed': 3})
    c = fit_mlp(small_data, {'max_iter': 50, 'seed': 4})
    assert_array_equal(a.predict(small_data.features), b.predict(small_data.features))
    assert not np.array_equal(a.W1, c.W1)


def test_invalid_config(small_data):
    with pytest.raises(DataError):
        fit_mlp(small_data, {'hidden': 0})
    with pytest.raises(DataError):
        fit_mlp(small_data, {'max_iter': 0}).predict(np.zeros((1, 2)))


def test_fits_identity_of_first_feature():
    X = np.random.default_rng(9).uniform(size=(200, 2))
    d = Dataset(X, X[:, 0].copy(), ('x1', 'x2'))
    model = fit_mlp(d, {'hidden': 10, 'max_iter': 3000, 'seed': 1})
    rmse = float(np.sqrt(np.mean((model.predict(X) - X[:, 0]) ** 2)))
    assert rmse < 0.05
