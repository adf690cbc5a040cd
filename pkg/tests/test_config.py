"""
配置加载与实验配置校验测试
"""
import os

import pytest

from core.errors import ConfigError
from core.presets import DEFAULT_SEED, ExperimentConfig
from utils.config import (env_int, load_env_file, load_experiment_file, load_generator_section, parse_overrides,
                          parse_value)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in ('PAPDIAG_SEED', 'PAPDIAG_JOBS', 'PAPDIAG_OUT'):
        monkeypatch.delenv(key, raising=False)


def test_parse_value():
    assert parse_value('3') == 3
    assert parse_value('0.5') == 0.5
    assert parse_value('true') is True
    assert parse_value('none') is None
    assert parse_value('forest, mlp') == ['forest', 'mlp']
    assert parse_value('0,0.9') == [0, 0.9]
    assert parse_value('PaP') == 'PaP'


def test_parse_overrides_nests_dotted_keys():
    assert parse_overrides({'forest.n_trees': '100', 'reps': '3'}) == {'forest': {'n_trees': 100}, 'reps': 3}
    with pytest.raises(ConfigError):
        parse_overrides({'forest': '1', 'forest.n_trees': '2'})


def test_load_env_file_keeps_existing(monkeypatch, tmp_path):
    env = tmp_path / '.env'
    env.write_text('# comment\nPAPDIAG_TEST_A=one\nPAPDIAG_TEST_B = two\n', encoding='utf-8')
    monkeypatch.delenv('PAPDIAG_TEST_A', raising=False)
    monkeypatch.setenv('PAPDIAG_TEST_B', 'kept')
    values = load_env_file(env)
    assert values == {'PAPDIAG_TEST_A': 'one', 'PAPDIAG_TEST_B': 'two'}
    assert os.environ['PAPDIAG_TEST_A'] == 'one'
    assert os.environ['PAPDIAG_TEST_B'] == 'kept'
    assert load_env_file(tmp_path / 'absent.env') == {}


def test_env_int(monkeypatch):
    assert env_int('PAPDIAG_JOBS', 1) == 1
    monkeypatch.setenv('PAPDIAG_JOBS', '4')
    assert env_int('PAPDIAG_JOBS', 1) == 4
    monkeypatch.setenv('PAPDIAG_JOBS', 'many')
    with pytest.raises(ConfigError):
        env_int('PAPDIAG_JOBS', 1)


def test_experiment_file(tmp_path):
    path = tmp_path / 'run.ini'
    path.write_text('[fig1_ranks]\nreps = 2\nrho = 0.0\nforest.n_trees = 10\nseed = 7\nout = elsewhere\n\n'
                    '[theorem_check]\nn_mc = 300\n', encoding='utf-8')
    configs = load_experiment_file(path)
    assert [c.preset for c in configs] == ['fig1_ranks', 'theorem_check']
    first = configs[0]
    assert first.seed == 7
    assert first.out_dir == 'elsewhere'
    settings = first.settings()
    assert settings['rhos'] == [0.0]
    assert settings['forest'] == {'n_trees': 10, 'min_leaf': 5}
    assert configs[1].seed == DEFAULT_SEED
    assert configs[1].out_dir == 'results'
    only = load_experiment_file(path, preset='theorem_check')
    assert len(only) == 1
    with pytest.raises(ConfigError):
        load_experiment_file(path, preset='fig2_grid')
    with pytest.raises(ConfigError):
        load_experiment_file(tmp_path / 'missing.ini')


def test_generator_section(tmp_path):
    path = tmp_path / 'run.ini'
    path.write_text('[generator]\nn = 500\nrho = 0.9\npair = 0, 2\nseed = 11\n\n'
                    '[theorem_check]\nn_mc = 300\n', encoding='utf-8')
    assert load_generator_section(path) == {'n': 500, 'rho': 0.9, 'pair': [0, 2], 'seed': 11}
    assert [c.preset for c in load_experiment_file(path)] == ['theorem_check']
    with pytest.raises(ConfigError):
        load_experiment_file(path, preset='generator')
    only_preset = tmp_path / 'preset.ini'
    only_preset.write_text('[theorem_check]\nn_mc = 300\n', encoding='utf-8')
    with pytest.raises(ConfigError):
        load_generator_section(only_preset)


def test_unknown_section(tmp_path):
    path = tmp_path / 'bad.ini'
    path.write_text('[fig9]\nreps = 1\n', encoding='utf-8')
    with pytest.raises(ConfigError):
        load_experiment_file(path)


@pytest.mark.parametrize('preset, overrides', [
    ('fig1_ranks', {'reps': 0}),
    ('fig1_ranks', {'rho': 1.5}),
    ('fig1_ranks', {'bogus': 1}),
    ('fig1_ranks', {'learners': ['svm']}),
    ('fig2_grid', {'measures': ['SHAP']}),
    ('fig3_effects', {'rhos': [0.1, 0.2]}),
])
def test_invalid_overrides(preset, overrides):
    with pytest.raises(ConfigError):
        ExperimentConfig(preset, overrides)


def test_invalid_run_parameters():
    with pytest.raises(ConfigError):
        ExperimentConfig('fig9')
    with pytest.raises(ConfigError):
        ExperimentConfig('fig1_ranks', seed=-1)
    with pytest.raises(ConfigError):
        ExperimentConfig('fig1_ranks', jobs=0)


def test_full_scale_settings():
    desk = ExperimentConfig('fig1_ranks').settings()
    full = ExperimentConfig('fig1_ranks', full=True).settings()
    assert desk['reps'] == 10
    assert full['reps'] == 50
    assert full['forest'] == {'n_trees': 500, 'min_leaf': 5}
    grid = ExperimentConfig('fig2_grid', {'n': 300}).settings()
    assert grid['ns'] == [300]
