"""
测试公共夹具
"""
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# 添加项目根目录到 Python 路径
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.dataset import Dataset
from core.synthgen import CopulaSpec, ResponseSpec, simulate_dataset


@pytest.fixture
def base_data():
    """十特征线性模拟数据，rho = 0，n = 500"""
    return simulate_dataset(CopulaSpec(p=10, pair=(0, 1), rho=0.0), ResponseSpec(), 500,
                            feature_rng=11, noise_rng=12)


@pytest.fixture
def small_data():
    gen = np.random.default_rng(7)
    X = gen.uniform(size=(40, 3))
    y = 1.0 + 2.0 * X[:, 0] - X[:, 1] + 0.05 * gen.standard_normal(40)
    return Dataset(X, y, ('x1', 'x2', 'x3'))


def write_hour_csv(path: Path, n_rows: int = 30, seed: int = 3, **replace) -> Path:
    """写一个与 UCI 小时级数据同列结构的小文件；replace 可覆盖整列"""
    gen = np.random.default_rng(seed)
    frame = pd.DataFrame({
        'instant': np.arange(1, n_rows + 1),
        'dteday': ['2011-01-01'] * n_rows,
        'season': gen.integers(1, 5, n_rows),
        'yr': gen.integers(0, 2, n_rows),
        'mnth': gen.integers(1, 13, n_rows),
        'hr': gen.integers(0, 24, n_rows),
        'holiday': gen.integers(0, 2, n_rows),
        'weekday': gen.integers(0, 7, n_rows),
        'workingday': gen.integers(0, 2, n_rows),
        'weathersit': gen.integers(1, 5, n_rows),
        'temp': gen.uniform(0, 1, n_rows).round(2),
        'atemp': gen.uniform(0, 1, n_rows).round(4),
        'hum': gen.uniform(0, 1, n_rows).round(2),
        'windspeed': gen.uniform(0, 0.5, n_rows).round(4),
        'casual': gen.integers(0, 50, n_rows),
        'registered': gen.integers(0, 300, n_rows),
    })
    frame['cnt'] = frame['casual'] + frame['registered'] + 1
    for column, values in replace.items():
        frame[column] = values
    frame.to_csv(path, index=False)
    return path
