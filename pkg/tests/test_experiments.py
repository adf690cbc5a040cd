"""
预设运行与命令行测试
"""
import json
import os

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

import experiments
from conftest import write_hour_csv
from core.bikeshare import PREDICTOR_COLUMNS, BikeShareConfig, load_bikeshare
from core.dataset import Dataset
from core.errors import ConfigError, DataError
from core.presets import DEFAULT_SEED, DESK_SETTINGS, ExperimentConfig, PresetRunner, theorem_checks
from core.run_manager import LOCK_NAME, MANIFEST_NAME, file_sha256
from core.synthgen import generate_dataset

SMALL_FIG1 = {'n': 150, 'rhos': [0.0], 'reps': 2, 'n_reps': 2, 'learners': ['linear', 'forest'],
              'forest': {'n_trees': 5}}


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in ('PAPDIAG_SEED', 'PAPDIAG_JOBS', 'PAPDIAG_OUT', 'BIKESHARE_PATH'):
        monkeypatch.delenv(key, raising=False)


def _run(tmp_path, preset, overrides, name='out', jobs=1):
    out = tmp_path / name
    result = PresetRunner(ExperimentConfig(preset, overrides, out_dir=str(out), jobs=jobs)).run()
    assert result['success'], result['error']
    return out, result


def _files(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != MANIFEST_NAME}


def test_serial_and_parallel_runs_are_identical(tmp_path):
    serial, _ = _run(tmp_path, 'fig1_ranks', SMALL_FIG1, 'serial')
    parallel, _ = _run(tmp_path, 'fig1_ranks', SMALL_FIG1, 'parallel', jobs=2)
    again, _ = _run(tmp_path, 'fig1_ranks', SMALL_FIG1, 'again')
    assert _files(serial) == _files(parallel) == _files(again)
    assert 'fig1_scores.csv' in _files(serial)
    assert 'fig1_forest_OOB_rho0.svg' in _files(serial)


def test_manifest_hashes_every_output(tmp_path):
    out, result = _run(tmp_path, 'fig1_ranks', SMALL_FIG1)
    manifest = json.loads((out / MANIFEST_NAME).read_text(encoding='utf-8'))
    listed = {o['name']: o['sha256'] for o in manifest['outputs']}
    assert set(listed) == set(_files(out))
    for name, digest in listed.items():
        assert file_sha256(out / name) == digest
    assert [r['replicate'] for r in manifest['replicates']] == [0, 1]
    assert manifest['config']['settings']['reps'] == 2
    assert not (out / LOCK_NAME).exists()
    assert sorted(result['outputs']) == sorted(listed)


def test_busy_output_directory(tmp_path):
    out = tmp_path / 'busy'
    out.mkdir()
    (out / LOCK_NAME).write_text(str(os.getpid()))
    with pytest.raises(ConfigError):
        PresetRunner(ExperimentConfig('fig1_ranks', SMALL_FIG1, out_dir=str(out))).run()
    assert (out / LOCK_NAME).exists()


def test_mean_ranks_table(tmp_path):
    out, result = _run(tmp_path, 'fig1_ranks', SMALL_FIG1)
    ranks = pd.read_csv(out / 'fig1_mean_ranks.csv')
    assert set(ranks['learner']) == {'linear', 'forest'}
    assert set(ranks['measure']) == {'PaP', 'OOB'}
    assert (ranks['n_replicates'] == 2).all()
    assert '0/linear/PaP' in result['summary']


def test_fig2_outputs(tmp_path):
    out, _ = _run(tmp_path, 'fig2_grid', {'ns': [80], 'rhos': [0.0, 0.9], 'reps': 2, 'n_reps': 1,
                                          'forest': {'n_trees': 4}})
    grid = pd.read_csv(out / 'fig2_rank_grid.csv')
    assert len(grid) == 2 * 2
    assert {'fig2_OOB.svg', 'fig2_PaP.svg', 'fig2_replicate_ranks.csv'} <= set(_files(out))


def test_fig3_outputs(tmp_path):
    out, _ = _run(tmp_path, 'fig3_effects', {'n': 150, 'reps': 2, 'learners': ['linear'], 'grid_points': 5})
    rows = pd.read_csv(out / 'fig3_reference_rows.csv')
    assert len(rows) == 11
    assert rows['x1'].tolist() == rows['x2'].tolist()
    ice = pd.read_csv(out / 'fig3_ice_linear.csv')
    assert len(ice) == 11 * 5
    assert not ice['supported'].all()
    ensemble = pd.read_csv(out / 'fig3_pd_linear.csv')
    assert list(ensemble.columns) == ['grid_value', 'mean', 'sd']
    assert {'fig3_pd_linear.svg', 'fig3_ice_linear.svg', 'fig3_data.csv'} <= set(_files(out))


def test_fig4_outputs(tmp_path):
    out, result = _run(tmp_path, 'fig4_contour', {'n': 80, 'reps': 2, 'pap_reps': 1, 'n_reps': 1,
                                                  'resolution': [6, 6], 'forest': {'n_trees': 4}})
    field = pd.read_csv(out / 'fig4_field.csv')
    assert len(field) == 36
    assert {'off_diagonal_mae', 'diagonal_mae', 'pap_x2_rho0', 'pap_x2_rho0.9'} <= set(result['summary'])
    assert {'fig4_comembers.csv', 'fig4_permutation_queries.svg', 'fig4_pap_x2.csv',
            'fig4_data.csv'} <= set(_files(out))


def test_fig5_outputs(tmp_path):
    out, _ = _run(tmp_path, 'fig5_alternatives', {'n': 100, 'rhos': [0.9], 'reps': 1, 'n_reps': 1,
                                                  'relearn_reps': 1, 'learners': ['linear']})
    scores = pd.read_csv(out / 'fig5_scores.csv')
    assert set(scores['measure']) == {'COND', 'DROP', 'PERM_RELEARN', 'COND_RELEARN'}
    assert (scores.loc[scores['measure'] == 'DROP', 'n_reps'] == 1).all()


def test_fig6_outputs(tmp_path):
    out, result = _run(tmp_path, 'fig6_nn_variance', {'n': 80, 'reps': 2, 'resolution': [6, 6],
                                                      'mlp': {'max_iter': 10, 'hidden': 4}})
    assert result['summary']['not_converged'] == 2
    assert {'fig6_field.csv', 'fig6_mean.svg', 'fig6_sd.svg', 'fig6_summary.csv',
            'fig6_data.csv'} <= set(_files(out))


def test_fig7_with_fixture(tmp_path):
    path = write_hour_csv(tmp_path / 'hour.csv', n_rows=60)
    out, result = _run(tmp_path, 'fig7_bikeshare', {'path': str(path), 'subsample': None, 'n_reps': 1,
                                                    'relearn_reps': 1, 'forest': {'n_trees': 4}})
    table = pd.read_csv(out / 'fig7_ranks.csv')
    assert len(table) == 12
    assert result['summary']['n_rows'] == 60
    data = Dataset.from_csv(out / 'fig7_data.csv')
    assert data.names == PREDICTOR_COLUMNS and data.n_rows == 60
    assert_array_equal(data.features, load_bikeshare(BikeShareConfig(path=path)).features)


def test_fig7_reads_path_from_environment(tmp_path, monkeypatch):
    path = write_hour_csv(tmp_path / 'hour.csv', n_rows=60)
    monkeypatch.setenv('BIKESHARE_PATH', str(path))
    out, result = _run(tmp_path, 'fig7_bikeshare', {'subsample': 40, 'n_reps': 1, 'relearn_reps': 1,
                                                    'forest': {'n_trees': 4}})
    assert result['summary']['n_rows'] == 40
    assert Dataset.from_csv(out / 'fig7_data.csv').n_rows == 40


def test_generated_data_written_as_dataset_csv(tmp_path):
    out, _ = _run(tmp_path, 'fig1_ranks', dict(SMALL_FIG1, rhos=[0.0, 0.9]))
    manifest = json.loads((out / MANIFEST_NAME).read_text(encoding='utf-8'))
    roles = {o['name']: o['role'] for o in manifest['outputs']}
    assert roles['fig1_data_rho0.csv'] == roles['fig1_data_rho0.9.csv'] == 'dataset'
    low = Dataset.from_csv(out / 'fig1_data_rho0.csv')
    high = Dataset.from_csv(out / 'fig1_data_rho0.9.csv')
    assert low.n_rows == high.n_rows == 150
    assert low.names == tuple(f'x{j}' for j in range(1, 11))
    assert np.corrcoef(high.features[:, 0], high.features[:, 1])[0, 1] > 0.7


def test_theorem_checks_pass():
    result = theorem_checks(DESK_SETTINGS['theorem_check'], DEFAULT_SEED)
    checks = result['checks']
    failed = checks[~checks['passed']]
    assert result['passed'], failed.to_string()
    assert set(checks['check']) == {'permutation_exact', 'permutation_monte_carlo', 'pd_line', 'ice_line',
                                    'normal_equations', 'drop', 'permute_relearn_vs_drop',
                                    'condition_relearn_vs_drop', 'conditional', 'joint_pair'}
    relearn = checks[checks['check'].str.endswith('relearn_vs_drop')]
    assert (relearn['target'] == 'relearn_as_drop (β²D)').all()
    oracle = result['oracle'].set_index(['feature', 'target_name'])['value']
    for row in relearn.itertuples():
        assert row.expected == oracle[(row.feature, 'relearn_as_drop')]
        assert row.expected == 0.5 * oracle[(row.feature, 'relearn')]


def test_cli_exit_codes(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = str(tmp_path / 'cli')
    assert experiments.main(['fig1_ranks', '--set', 'bogus=1', '--out', out]) == ConfigError.exit_code
    assert experiments.main(['fig7_bikeshare', '--out', out]) == ConfigError.exit_code
    missing = str(tmp_path / 'none.csv')
    assert experiments.main(['fig7_bikeshare', '--set', f'path={missing}', '--out', out]) == DataError.exit_code
    assert not (tmp_path / 'cli' / LOCK_NAME).exists()


def test_cli_runs_preset(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / 'cli'
    status = experiments.main(['fig3_effects', '--reps', '1', '--seed', '3', '--out', str(out),
                               '--set', 'n=120', '--set', 'learners=linear', '--set', 'grid_points=5'])
    assert status == 0
    manifest = json.loads((out / MANIFEST_NAME).read_text(encoding='utf-8'))
    assert manifest['master_seed'] == 3
    assert manifest['config']['settings']['reps'] == 1


def test_cli_precedence(tmp_path):
    path = tmp_path / 'run.ini'
    path.write_text('[fig1_ranks]\nreps = 2\nseed = 7\nforest.n_trees = 10\n', encoding='utf-8')
    args = experiments.build_parser().parse_args(['run', '--config', str(path), '--seed', '9', '--reps', '3',
                                                  '--set', 'forest.min_leaf=3'])
    config = experiments.build_configs(args)[0]
    assert config.seed == 9
    settings = config.settings()
    assert settings['reps'] == 3
    assert settings['forest'] == {'n_trees': 10, 'min_leaf': 3}
    args = experiments.build_parser().parse_args(['run', '--config', str(path)])
    assert experiments.build_configs(args)[0].seed == 7


def test_cli_simulate_writes_dataset(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    ini = tmp_path / 'gen.ini'
    ini.write_text('[generator]\nn = 40\np = 3\nbeta = 1, 0, 2\nrho = 0.5\nseed = 4\n', encoding='utf-8')
    first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
    assert experiments.main(['simulate', '--config', str(ini), '--out', str(first)]) == 0
    assert experiments.main(['simulate', '--config', str(ini), '--seed', '5', '--set', 'sigma=0',
                             '--out', str(second)]) == 0
    expected = generate_dataset({'n': 40, 'p': 3, 'beta': [1, 0, 2], 'rho': 0.5, 'seed': 4})
    a, b = Dataset.from_csv(first), Dataset.from_csv(second)
    assert_array_equal(a.features, expected.features)
    assert_array_equal(a.response, expected.response)
    assert a.names == ('x1', 'x2', 'x3') and b.n_rows == 40
    assert not np.array_equal(a.features, b.features)
    assert_allclose(b.response, b.features @ np.array([1.0, 0.0, 2.0]), atol=1e-12)
    assert experiments.main(['simulate', '--set', 'p=3', '--set', 'beta=1,2',
                             '--out', str(first)]) == ConfigError.exit_code
