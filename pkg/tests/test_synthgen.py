"""
合成数据与 copula 条件分布测试
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.stats import kstest, ks_2samp, norm, spearmanr

from core.errors import ConfigError, DataError
from core.synthgen import (CopulaConditional, CopulaSpec, ResponseSpec, conditional_range,
                           conditional_sample, extrapolation_design, gen_response, generate_dataset,
                           generator_config, sample_features, simulate_dataset)


def test_marginals_are_uniform():
    X = sample_features(CopulaSpec(p=10, pair=(0, 1), rho=0.9), 10000, 2024)
    assert X.shape == (10000, 10)
    for j in (0, 1, 5):
        assert kstest(X[:, j], 'uniform').pvalue > 0.01


@pytest.mark.parametrize('rho', [0.5, 0.9])
def test_spearman_matches_copula(rho):
    X = sample_features(CopulaSpec(p=3, pair=(0, 1), rho=rho), 10000, 99)
    observed = spearmanr(X[:, 0], X[:, 1]).correlation
    assert abs(observed - 6.0 / np.pi * np.arcsin(rho / 2.0)) < 0.03


def test_joint_matches_marginal_times_conditional():
    rho = 0.9
    X = sample_features(CopulaSpec(p=2, pair=(0, 1), rho=rho), 10000, 5)
    gen = np.random.default_rng(6)
    x1 = gen.uniform(size=10000)
    x2 = conditional_sample(np.clip(x1, 1e-9, 1 - 1e-9), rho, gen)
    assert ks_2samp(X[:, 0] + X[:, 1], x1 + x2).pvalue > 0.01
    assert ks_2samp(X[:, 0] - X[:, 1], x1 - x2).pvalue > 0.01
    # 条件切片：x1 落在 [0.1, 0.2] 时 x2 的分布
    joint_slice = X[(X[:, 0] >= 0.1) & (X[:, 0] <= 0.2), 1]
    built_slice = x2[(x1 >= 0.1) & (x1 <= 0.2)]
    assert ks_2samp(joint_slice, built_slice).pvalue > 0.01
    assert ks_2samp(joint_slice, X[:, 1]).pvalue < 1e-6


def test_perfect_correlation_copies_pair():
    X = sample_features(CopulaSpec(p=4, pair=(1, 3), rho=1.0), 200, 0)
    assert_array_equal(X[:, 1], X[:, 3])


def test_copula_spec_validation():
    with pytest.raises(ConfigError):
        CopulaSpec(p=3, pair=(0, 0))
    with pytest.raises(ConfigError):
        CopulaSpec(p=3, pair=(0, 3))
    with pytest.raises(ConfigError):
        CopulaSpec(p=3, rho=1.5)
    with pytest.raises(ConfigError):
        ResponseSpec(beta=(1.0,), sigma=-1.0)


def test_conditional_sample_preconditions():
    with pytest.raises(DataError):
        conditional_sample(0.5, 1.0, 0)
    with pytest.raises(DataError):
        conditional_sample(0.0, 0.5, 0)
    draws = conditional_sample(np.array([0.2, 0.8]), 0.5, 0, size=(50,))
    assert draws.shape == (2, 50)
    assert np.all((draws > 0) & (draws < 1))


def test_conditional_range_at_zero_correlation():
    lo, hi = conditional_range(0.3, 0.0)
    assert_allclose([lo, hi], [norm.cdf(-2.0), norm.cdf(2.0)])
    lo, hi = conditional_range(np.array([0.05, 0.95]), 0.9)
    assert lo[0] < 0.05 < hi[0]
    assert hi[0] < 0.5 < lo[1]


def test_response_without_noise_is_linear():
    X = np.random.default_rng(1).uniform(size=(20, 3))
    y = gen_response(X, ResponseSpec(beta=(1.0, -2.0, 0.5), beta0=3.0, sigma=0.0), 0)
    assert_allclose(y, 3.0 + X @ np.array([1.0, -2.0, 0.5]))
    with pytest.raises(DataError):
        gen_response(X, ResponseSpec(beta=(1.0, 2.0)), 0)


def test_noise_stream_does_not_move_features():
    copula = CopulaSpec(p=3, pair=(0, 1), rho=0.5)
    spec = ResponseSpec(beta=(1.0, 1.0, 1.0))
    a = simulate_dataset(copula, spec, 50, feature_rng=1, noise_rng=2)
    b = simulate_dataset(copula, spec, 50, feature_rng=1, noise_rng=3)
    assert_array_equal(a.features, b.features)
    assert not np.array_equal(a.response, b.response)
    assert a.names == ('x1', 'x2', 'x3')


def test_extrapolation_design_shape():
    d = extrapolation_design(200, 0.9, 0.05, feature_rng=1, noise_rng=2)
    assert d.n_features == 2
    assert np.std(d.response - d.features[:, 0]) < 0.1


def test_generator_config_defaults_and_checks():
    copula, response, n, seed = generator_config({'rho': 0.25, 'n': 300})
    assert copula.p == 10 and copula.rho == 0.25 and n == 300
    assert response.beta[5] == 0.0 and seed == 0
    assert generator_config({'seed': 5, 'n': 10})[3] == 5
    with pytest.raises(ConfigError):
        generator_config({'p': 3, 'beta': [1.0, 2.0]})
    with pytest.raises(ConfigError):
        generator_config({'seed': -1})


def test_generate_dataset_follows_seed():
    config = {'n': 50, 'p': 3, 'beta': [1.0, 0.0, 2.0], 'rho': 0.5, 'seed': 7}
    a, b = generate_dataset(config), generate_dataset(config)
    other = generate_dataset(dict(config, seed=8))
    assert a.names == ('x1', 'x2', 'x3') and a.n_rows == 50
    assert_array_equal(a.features, b.features)
    assert_array_equal(a.response, b.response)
    assert not np.array_equal(a.features, other.features)


def test_conditional_provider_support_mask():
    grid = np.linspace(0.0, 1.0, 11)
    provider = CopulaConditional(CopulaSpec(p=3, pair=(0, 1), rho=0.9))
    X = np.array([[0.5, 0.05, 0.3], [0.5, 0.95, 0.3]])
    mask = provider.support_mask(X, 0, grid)
    assert mask.shape == (2, 11)
    assert mask[0, 1] and not mask[0, 10]
    assert mask[1, 9] and not mask[1, 0]
    assert provider.support_mask(X, 2, grid).all()

    degenerate = CopulaConditional(CopulaSpec(p=3, pair=(0, 1), rho=1.0))
    assert degenerate.support_mask(X, 0, grid) is None
    assert degenerate.supports(2)
