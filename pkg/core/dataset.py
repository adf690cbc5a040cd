#!/usr/bin/env python3
"""
数据集核心模块
负责数据容器、列操作（置换 / 置常数 / 替换）、平方损失和排名工具
所有操作都返回新的 Dataset，原数据保持不变
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DataError

logger = logging.getLogger(__name__)

RESPONSE_COLUMN = 'response'


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """特征矩阵（N×p，按列存储）+ 响应向量 + 特征名"""

    features: np.ndarray
    response: np.ndarray
    names: Tuple[str, ...]

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, order='F', copy=True)
        response = np.array(self.response, dtype=np.float64, copy=True).reshape(-1)
        if features.ndim != 2:
            raise DataError(f"特征矩阵必须是二维的，实际维度: {features.ndim}")
        n, p = features.shape
        if n < 1 or p < 1:
            raise DataError(f"数据集至少需要 1 行 1 列，实际: {n}×{p}")
        if not np.all(np.isfinite(features)):
            raise DataError("特征矩阵包含非有限值")
        if response.shape[0] != n:
            raise DataError(f"响应长度 {response.shape[0]} 与行数 {n} 不一致")
        names = tuple(str(name) for name in self.names)
        if len(names) != p:
            raise DataError(f"特征名数量 {len(names)} 与列数 {p} 不一致")
        if len(set(names)) != p:
            raise DataError(f"特征名存在重复: {names}")
        object.__setattr__(self, 'features', _frozen(features))
        object.__setattr__(self, 'response', _frozen(response))
        object.__setattr__(self, 'names', names)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def column(self, j: int) -> np.ndarray:
        check_feature_index(self, j)
        return self.features[:, j]

    def with_features(self, features: np.ndarray) -> 'Dataset':
        return Dataset(features, self.response, self.names)

    def drop_column(self, j: int) -> 'Dataset':
        """去掉第 j 列（X₋ⱼ），用于 drop / LOCO 重要性"""
        check_feature_index(self, j)
        if self.n_features == 1:
            raise DataError("只有一个特征，去掉后没有剩余特征")
        keep = [k for k in range(self.n_features) if k != j]
        return Dataset(self.features[:, keep], self.response,
                       tuple(self.names[k] for k in keep))

    def take_rows(self, rows: Sequence[int]) -> 'Dataset':
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size == 0:
            raise DataError("行选择为空")
        if rows.min() < 0 or rows.max() >= self.n_rows:
            raise DataError(f"行索引越界 (N={self.n_rows})")
        return Dataset(self.features[rows], self.response[rows], self.names)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(np.asarray(self.features), columns=list(self.names))
        frame[RESPONSE_COLUMN] = np.asarray(self.response)
        return frame

    def to_csv(self, path: Union[str, Path]) -> Path:
        """写出 CSV：表头为特征名 + response，UTF-8，'.' 作小数点"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, encoding='utf-8', float_format='%.17g')
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> 'Dataset':
        path = Path(path)
        if not path.exists():
            raise DataError(f"数据文件不存在: {path}")
        frame = pd.read_csv(path, encoding='utf-8', float_precision='round_trip')
        if frame.columns[-1] != RESPONSE_COLUMN:
            raise DataError(f"CSV 最后一列必须是 '{RESPONSE_COLUMN}': {path}")
        try:
            values = frame.to_numpy(dtype=np.float64)
        except ValueError as e:
            raise DataError(f"CSV 包含非数值单元格: {e}") from e
        return cls(values[:, :-1], values[:, -1], tuple(frame.columns[:-1]))


@dataclass(frozen=True, eq=False)
class Permutation:
    """行置换：order 是 {0..N-1} 上的双射"""

    order: np.ndarray

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.int64).reshape(-1)
        n = order.shape[0]
        if n == 0 or not np.array_equal(np.sort(order), np.arange(n)):
            raise DataError("置换不是 {0..N-1} 上的双射")
        object.__setattr__(self, 'order', _frozen(order))

    def __len__(self) -> int:
        return self.order.shape[0]

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> 'Permutation':
        return cls(rng.permutation(n))

    @classmethod
    def identity(cls, n: int) -> 'Permutation':
        return cls(np.arange(n))


@dataclass(frozen=True)
class LossVector:
    per_row: np.ndarray
    total: float


def check_feature_index(d: Dataset, j: int):
    if not isinstance(j, (int, np.integer)) or j < 0 or j >= d.n_features:
        raise DataError(f"特征索引越界: {j} (p={d.n_features})")


def check_width(X: np.ndarray, p: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != p:
        raise DataError(f"输入列数 {X.shape[-1]} 与模型特征数 {p} 不一致")
    return X


def permute_column(d: Dataset, j: int, perm: Permutation) -> Dataset:
    """
    置换第 j 列（Xπ,ʲ）

    Args:
        d: 数据集
        j: 特征索引（从 0 开始）
        perm: 行置换，新列第 i 个元素取原列第 perm.order[i] 个元素

    Returns:
        Dataset: 仅第 j 列被重新排列，响应不变
    """
    check_feature_index(d, j)
    if not isinstance(perm, Permutation):
        perm = Permutation(perm)
    if len(perm) != d.n_rows:
        raise DataError(f"置换长度 {len(perm)} 与行数 {d.n_rows} 不一致")
    features = np.array(d.features, order='F')
    features[:, j] = d.features[perm.order, j]
    return d.with_features(features)


def set_column(d: Dataset, j: int, x: float) -> Dataset:
    """将第 j 列整列置为常数 x（Xˣ,ʲ，用于 PD / ICE）"""
    check_feature_index(d, j)
    if not np.isfinite(x):
        raise DataError(f"常数值必须有限: {x}")
    features = np.array(d.features, order='F')
    features[:, j] = float(x)
    return d.with_features(features)


def replace_column(d: Dataset, j: int, values) -> Dataset:
    """用给定向量替换第 j 列（Xᶜ,ʲ 的构造步骤）"""
    check_feature_index(d, j)
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.shape[0] != d.n_rows:
        raise DataError(f"替换列长度 {values.shape[0]} 与行数 {d.n_rows} 不一致")
    if not np.all(np.isfinite(values)):
        raise DataError("替换列包含非有限值")
    features = np.array(d.features, order='F')
    features[:, j] = values
    return d.with_features(features)


def squared_loss(y, yhat) -> LossVector:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    yhat = np.asarray(yhat, dtype=np.float64).reshape(-1)
    if y.shape != yhat.shape:
        raise DataError(f"长度不一致: y={y.shape[0]}, yhat={yhat.shape[0]}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yhat))):
        raise DataError("损失计算的输入包含非有限值")
    per_row = (y - yhat) ** 2
    return LossVector(per_row=per_row, total=float(np.sum(per_row)))


def rank_scores(scores) -> np.ndarray:
    """
    分数转排名：最小分数为 1，最大为 p；相同分数按特征索引从小到大排名

    Returns:
        np.ndarray: 长度 p 的整数排名向量，是 {1..p} 的一个排列
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(scores)):
        raise DataError("分数包含非有限值，无法排名")
    order = np.argsort(scores, kind='stable')
    ranks = np.empty(scores.shape[0], dtype=np.int64)
    ranks[order] = np.arange(1, scores.shape[0] + 1)
    return ranks
