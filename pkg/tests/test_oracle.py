"""
线性模型理论结果测试
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.dataset import Dataset
from core.effects import default_grid, ice_curves, partial_dependence
from core.errors import DataError
from core.importance import vi_drop, vi_pap
from core.learners import Learner
from core.linear_model import fit_linear
from core.oracle import (LinearOracle, brute_force_vi, conditional_variance_sum, dependence_oracle,
                         joint_pair_importance, normal_equation_residuals, oracle_frame,
                         regress_feature, theorem1_ice_line, theorem1_pd_line, theorem1_vi,
                         theorem2_targets)
from core.synthgen import CopulaSpec, ResponseSpec, simulate_dataset


@pytest.fixture
def tiny_data():
    return simulate_dataset(CopulaSpec(p=3, pair=(0, 1), rho=0.0), ResponseSpec(beta=(1.0, 0.5, 2.0)),
                            6, feature_rng=21, noise_rng=22)


def test_enumeration_matches_closed_form(tiny_data):
    model = fit_linear(tiny_data)
    closed = theorem1_vi(LinearOracle.from_model(model, tiny_data))
    for j in range(tiny_data.n_features):
        assert abs(brute_force_vi(model, tiny_data, j) - closed[j]) < 1e-9
        assert abs(brute_force_vi(model, tiny_data, j, n_jobs=2) - closed[j]) < 1e-9


def test_enumeration_three_points():
    x = np.array([[0.0], [0.5], [1.0]])
    d = Dataset(x, 2.0 * x[:, 0], ('x1',))
    assert_allclose(brute_force_vi(fit_linear(d), d, 0), 4.0, atol=1e-12)


def test_enumeration_size_limit():
    X = np.random.default_rng(0).uniform(size=(9, 2))
    d = Dataset(X, X[:, 0], ('a', 'b'))
    with pytest.raises(DataError):
        brute_force_vi(fit_linear(d), d, 0)


def test_monte_carlo_permutation_matches_closed_form():
    d = simulate_dataset(CopulaSpec(p=10, pair=(0, 1), rho=0.0), ResponseSpec(), 500,
                         feature_rng=31, noise_rng=32)
    model = fit_linear(d)
    closed = theorem1_vi(LinearOracle.from_model(model, d))
    for j in (0, 6, 9):
        score = vi_pap(model, d, j, 200, j)
        assert abs(score - closed[j]) / closed[j] < 0.05


def test_pd_and_ice_are_lines(base_data):
    model = fit_linear(base_data)
    oracle = LinearOracle.from_model(model, base_data)
    grid = default_grid(21)
    for j in (0, 5, 9):
        intercept, slope = theorem1_pd_line(oracle, j)
        pd_curve = partial_dependence(model, base_data, j, grid)
        assert np.max(np.abs(pd_curve.values - (intercept + slope * grid))) < 1e-9
        ice = ice_curves(model, base_data, range(10), j, grid)
        for i in range(10):
            c, b = theorem1_ice_line(oracle, base_data.features[i], j)
            assert np.max(np.abs(ice.values[i] - (c + b * grid))) < 1e-9


def test_normal_equations_vanish(base_data):
    residuals = normal_equation_residuals(fit_linear(base_data), base_data)
    assert_allclose(residuals, 0.0, atol=1e-8)


def test_drop_equals_residual_sum_of_squares():
    d = simulate_dataset(CopulaSpec(p=4, pair=(0, 1), rho=0.9), ResponseSpec(beta=(1.0, 1.0, 0.5, 0.0)),
                         400, feature_rng=41, noise_rng=42)
    model = fit_linear(d)
    targets = theorem2_targets(dependence_oracle(d), model.beta)
    for j in range(3):
        assert_allclose(vi_drop(Learner('linear'), d, j, baseline_model=model), targets['drop'][j],
                        rtol=1e-8)
    assert_allclose(targets['relearn'], 2.0 * targets['drop'])
    assert_allclose(targets['relearn_as_drop'], targets['drop'])
    assert 'conditional' not in targets


def test_regress_feature_residuals(small_data):
    entry = regress_feature(small_data, 2)
    assert_allclose(entry.residual_ss, entry.residuals @ entry.residuals)
    assert entry.residual_ss <= entry.centered_ss


def test_conditional_variance_sum():
    X = np.random.default_rng(0).uniform(size=(300, 3))
    spec = CopulaSpec(p=3, pair=(0, 1), rho=0.9)
    assert conditional_variance_sum(spec, X, 2) == 300 / 12.0
    assert conditional_variance_sum(CopulaSpec(p=3, rho=0.0), X, 0) == 300 / 12.0
    assert conditional_variance_sum(CopulaSpec(p=3, rho=1.0), X, 0) == 0.0
    estimate = conditional_variance_sum(spec, X, 0, n_mc=2000, rng=1)
    assert 0.0 < estimate < 300 / 12.0
    with pytest.raises(DataError):
        conditional_variance_sum(spec, X[:, :2], 0)


def test_dependence_oracle_with_copula():
    spec = CopulaSpec(p=3, pair=(0, 1), rho=0.5)
    d = simulate_dataset(spec, ResponseSpec(beta=(1.0, 1.0, 1.0)), 200, feature_rng=1, noise_rng=2)
    dep = dependence_oracle(d, spec, n_mc=200, rng=3)
    assert dep.conditional_variance.shape == (3,)
    targets = theorem2_targets(dep, [1.0, 1.0, 1.0])
    assert_allclose(targets['conditional'], 2.0 * dep.conditional_variance)
    with pytest.raises(DataError):
        theorem2_targets(dep, [1.0, 1.0])


def test_joint_pair_expansion(base_data):
    oracle = LinearOracle.from_model(fit_linear(base_data), base_data)
    X = base_data.features
    a = X[:, 0] - oracle.column_means[0]
    b = X[:, 1] - oracle.column_means[1]
    expected = (oracle.beta[0] ** 2 * oracle.centered_ss[0] + oracle.beta[1] ** 2 * oracle.centered_ss[1]
                + 2 * oracle.beta[0] * oracle.beta[1] * float(a @ b))
    assert_allclose(joint_pair_importance(oracle, base_data, 0, 1), expected, rtol=1e-9)
    with pytest.raises(DataError):
        joint_pair_importance(oracle, base_data, 2, 2)


def test_oracle_frame(base_data):
    model = fit_linear(base_data)
    oracle = LinearOracle.from_model(model, base_data)
    frame = oracle_frame(base_data.names, oracle, theorem2_targets(dependence_oracle(base_data), model.beta))
    assert list(frame.columns) == ['feature', 'theorem', 'target_name', 'value']
    assert len(frame) == 10 * 4
