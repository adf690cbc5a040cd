"""
学习器接口与模型保存 / 加载测试
"""
import json

import pytest
from numpy.testing import assert_array_equal

from core.errors import ConfigError, DataError
from core.learners import Learner, load_model, make_learner, save_model


def test_unknown_kind():
    with pytest.raises(ConfigError):
        Learner('svm')


def test_with_seed():
    forest = make_learner('forest', {'n_trees': 5, 'seed': 1})
    reseeded = forest.with_seed(42)
    assert reseeded.config['seed'] == 42
    assert forest.config['seed'] == 1
    assert reseeded.config['n_trees'] == 5
    linear = Learner('linear')
    assert linear.with_seed(3) is linear
    assert linear.name == 'linear'


@pytest.mark.parametrize('kind, config', [
    ('linear', {}),
    ('forest', {'n_trees': 4, 'seed': 2}),
    ('mlp', {'max_iter': 30, 'hidden': 5, 'seed': 2}),
])
def test_saved_model_predicts_identically(kind, config, small_data, tmp_path):
    model = make_learner(kind, config).fit(small_data)
    path = save_model(model, tmp_path / f'{kind}.json')
    with open(path, encoding='utf-8') as f:
        assert json.load(f)['kind'] == kind
    restored = load_model(path)
    assert_array_equal(restored.predict(small_data.features), model.predict(small_data.features))


def test_load_errors(tmp_path):
    with pytest.raises(DataError):
        load_model(tmp_path / 'missing.json')
    path = tmp_path / 'odd.json'
    path.write_text('{"kind": "svm", "params": {}}', encoding='utf-8')
    with pytest.raises(DataError):
        load_model(path)
