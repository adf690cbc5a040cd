#!/usr/bin/env python3
"""
共享单车数据模块
读取 UCI 小时级共享单车数据，响应为 ln(每小时租车数)，并比较袋外与置换重学两种重要性排名
"""
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from utils.seeding import as_generator, derive_seed
from .dataset import Dataset
from .errors import ConfigError, DataError
from .forest import fit_forest
from .importance import OOB, PERM_RELEARN, importance_report
from .learners import Learner

logger = logging.getLogger(__name__)

PREDICTOR_COLUMNS = ('season', 'yr', 'mnth', 'hr', 'holiday', 'weekday', 'workingday',
                     'weathersit', 'temp', 'atemp', 'hum', 'windspeed')
COUNT_COLUMN = 'cnt'
DROPPED_COLUMNS = ('instant', 'dteday', 'casual', 'registered')
DEFAULT_SUBSAMPLE = 4000


@dataclass(frozen=True)
class BikeShareConfig:
    path: Union[str, Path]
    subsample: Optional[int] = None
    seed: int = 0

    @classmethod
    def from_env(cls, subsample: Optional[int] = DEFAULT_SUBSAMPLE, seed: int = 0) -> 'BikeShareConfig':
        path = os.getenv('BIKESHARE_PATH')
        if not path:
            raise ConfigError("未设置 BIKESHARE_PATH，请在 .env 中指定小时级数据文件")
        return cls(path=path, subsample=subsample, seed=seed)


def load_bikeshare(cfg: BikeShareConfig) -> Dataset:
    """
    读取小时级数据文件

    Args:
        cfg: 文件路径、可选子样本量、种子

    Returns:
        Dataset: 12 个预测列，响应 ln(cnt)；不做子抽样时保持原始行顺序

    Raises:
        DataError: 文件不存在、缺少列、非数值单元格、cnt < 1
    """
    path = Path(cfg.path)
    if not path.exists():
        raise DataError(f"共享单车数据文件不存在: {path}")
    frame = pd.read_csv(path, encoding='utf-8')
    missing = [c for c in PREDICTOR_COLUMNS + (COUNT_COLUMN,) if c not in frame.columns]
    if missing:
        raise DataError(f"数据文件缺少列: {', '.join(missing)}")

    frame = frame.drop(columns=[c for c in DROPPED_COLUMNS if c in frame.columns])
    selected = frame[list(PREDICTOR_COLUMNS) + [COUNT_COLUMN]]
    numeric = selected.apply(pd.to_numeric, errors='coerce')
    bad = numeric.isna()
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        raise DataError(f"非数值单元格: 第 {row + 1} 行, 列 {selected.columns[col]}")

    counts = numeric[COUNT_COLUMN].to_numpy(dtype=np.float64)
    invalid = np.nonzero(counts < 1)[0]
    if invalid.size:
        listing = ', '.join(str(i + 1) for i in invalid[:20])
        raise DataError(f"{invalid.size} 行 cnt < 1，无法取对数（数据行号: {listing}）")

    features = numeric[list(PREDICTOR_COLUMNS)].to_numpy(dtype=np.float64)
    response = np.log(counts)
    n = features.shape[0]
    if cfg.subsample is not None:
        if not 1 <= cfg.subsample <= n:
            raise ConfigError(f"子样本量 {cfg.subsample} 超出行数 {n}")
        gen = as_generator(derive_seed(cfg.seed, 0, 'bikeshare_subsample'))
        rows = np.sort(gen.choice(n, size=cfg.subsample, replace=False))
        features, response = features[rows], response[rows]

    logger.info(f"📦 共享单车数据: {n} 行, 使用 {features.shape[0]} 行, {len(PREDICTOR_COLUMNS)} 个预测特征")
    return Dataset(features, response, PREDICTOR_COLUMNS)


def rank_comparison(d: Dataset, forest_config: Optional[Dict] = None, relearn_reps: int = 3,
                    seed: int = 0, n_reps: int = 10) -> pd.DataFrame:
    """
    在同一数据上训练森林，比较袋外重要性排名与置换重学重要性排名

    Returns:
        pd.DataFrame: feature, oob_rank, relearn_rank
    """
    config = dict(forest_config or {})
    config.setdefault('seed', derive_seed(seed, 0, 'forest').generator().integers(0, 2 ** 31 - 1))
    config['seed'] = int(config['seed'])
    learner = Learner('forest', config)
    model = fit_forest(d, config)

    oob = importance_report(OOB, d, model=model, n_reps=n_reps, seed=seed)
    relearn = importance_report(PERM_RELEARN, d, model=model, learner=learner,
                                n_reps=relearn_reps, seed=seed)
    logger.info(f"📊 袋外 vs 重学排名: {dict(zip(d.names, zip(oob.ranks.tolist(), relearn.ranks.tolist())))}")
    return pd.DataFrame({
        'feature': list(d.names),
        'oob_rank': oob.ranks,
        'relearn_rank': relearn.ranks,
    })
