#!/usr/bin/env python3
"""
效应曲线模块
部分依赖（PD）、带数据支撑标记的 ICE 曲线、二维预测网格与模型集成方差场
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from utils.seeding import RngLike, as_generator
from .dataset import Dataset, Permutation, check_feature_index
from .errors import DataError
from .learners import Predictor

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 21
DEFAULT_FIELD_RESOLUTION = (101, 101)


@dataclass(frozen=True, eq=False)
class EffectCurve:
    """
    kind == 'pd'：values 形状 (网格点数,)
    kind == 'ice'：values 形状 (行数, 网格点数)，row_ids 为对应行号
    """

    kind: str
    feature: int
    grid: np.ndarray
    values: np.ndarray
    support: Optional[np.ndarray] = None
    row_ids: Optional[np.ndarray] = None
    name: str = ''

    def __post_init__(self):
        if self.kind not in ('pd', 'ice'):
            raise DataError(f"未知的曲线类型: {self.kind}")
        grid = np.asarray(self.grid, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
            raise DataError("网格必须非空且严格递增")
        if values.shape[-1] != grid.size or values.ndim != (1 if self.kind == 'pd' else 2):
            raise DataError(f"曲线取值形状 {values.shape} 与网格长度 {grid.size} 不一致")
        if not np.all(np.isfinite(values)):
            raise DataError("曲线取值包含非有限值")
        object.__setattr__(self, 'grid', grid)
        object.__setattr__(self, 'values', values)

    @property
    def n_curves(self) -> int:
        return 1 if self.kind == 'pd' else self.values.shape[0]

    def curve_matrix(self) -> np.ndarray:
        return self.values.reshape(self.n_curves, -1)

    def support_matrix(self) -> np.ndarray:
        if self.support is None:
            return np.ones((self.n_curves, self.grid.size), dtype=bool)
        return np.asarray(self.support, dtype=bool).reshape(self.n_curves, -1)

    def to_frame(self) -> pd.DataFrame:
        """长表：row_id（PD 为空）, grid_value, prediction, supported"""
        values = self.curve_matrix()
        support = self.support_matrix()
        if self.kind == 'pd':
            row_ids = [''] * self.grid.size
        else:
            row_ids = np.repeat(self.row_ids, self.grid.size).tolist()
        return pd.DataFrame({
            'row_id': row_ids,
            'grid_value': np.tile(self.grid, self.n_curves),
            'prediction': values.ravel(),
            'supported': support.ravel(),
        })


@dataclass(frozen=True, eq=False)
class GridField:
    bounds: Tuple[Tuple[float, float], Tuple[float, float]]
    resolution: Tuple[int, int]
    mean: np.ndarray          # (res_x2, res_x1)，行对应 x2
    sd: np.ndarray
    n_models: int
    training_points: Optional[np.ndarray] = None

    @property
    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        (lo1, hi1), (lo2, hi2) = self.bounds
        return np.linspace(lo1, hi1, self.resolution[0]), np.linspace(lo2, hi2, self.resolution[1])

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        a1, a2 = self.axes
        return np.meshgrid(a1, a2)

    def to_frame(self) -> pd.DataFrame:
        g1, g2 = self.coordinates()
        return pd.DataFrame({'x1': g1.ravel(), 'x2': g2.ravel(),
                             'mean': self.mean.ravel(), 'sd': self.sd.ravel()})


def default_grid(n_points: int = DEFAULT_GRID_POINTS, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    if n_points < 2 or not hi > lo:
        raise DataError(f"无效的网格设定: {n_points} 点, [{lo}, {hi}]")
    return np.linspace(lo, hi, n_points)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if grid.size == 0:
        raise DataError("网格不能为空")
    if not np.all(np.isfinite(grid)):
        raise DataError("网格包含非有限值")
    if np.any(np.diff(grid) <= 0):
        raise DataError("网格必须严格递增")
    return grid


def _ice_matrix(model: Predictor, X: np.ndarray, j: int, grid: np.ndarray) -> np.ndarray:
    """一次性构造 (行数 × 网格点数) 个查询点并预测"""
    n, g = X.shape[0], grid.size
    stacked = np.repeat(X, g, axis=0)
    stacked[:, j] = np.tile(grid, n)
    width = getattr(model, 'n_features', X.shape[1])
    if width != X.shape[1]:
        raise DataError(f"模型特征数 {width} 与数据列数 {X.shape[1]} 不一致")
    return np.asarray(model.predict(stacked), dtype=np.float64).reshape(n, g)


def partial_dependence(model: Predictor, d: Dataset, j: int, grid=None) -> EffectCurve:
    """
    部分依赖 PD(x) = (1/N) Σᵢ f(xᵢ 的第 j 项置为 x)

    Args:
        model: 已训练模型
        d: 数据集（所有行参与平均）
        j: 特征索引
        grid: 严格递增的取值网格，默认 [0, 1] 上 21 个等距点

    Returns:
        EffectCurve: kind='pd'
    """
    check_feature_index(d, j)
    grid = default_grid() if grid is None else _check_grid(grid)
    ice = _ice_matrix(model, np.array(d.features), j, grid)
    return EffectCurve(kind='pd', feature=j, grid=grid, values=ice.mean(axis=0), name=d.names[j])


def ice_curves(model: Predictor, d: Dataset, rows: Optional[Sequence[int]], j: int,
               grid=None, support=None) -> EffectCurve:
    """
    ICE 曲线：ICEᵢ(x) = f(xᵢ 的第 j 项置为 x)

    Args:
        rows: 行号列表，None 表示全部行
        support: 条件支撑提供者（需实现 support_mask(X, j, grid)），为 None 时不计算掩码

    Returns:
        EffectCurve: kind='ice'，support 为 (行数, 网格点数) 布尔矩阵
    """
    check_feature_index(d, j)
    grid = default_grid() if grid is None else _check_grid(grid)
    rows = np.arange(d.n_rows) if rows is None else np.asarray(rows, dtype=np.int64).reshape(-1)
    if rows.size == 0 or rows.min() < 0 or rows.max() >= d.n_rows:
        raise DataError(f"ICE 行号无效 (N={d.n_rows})")
    X = np.array(d.features[rows])
    values = _ice_matrix(model, X, j, grid)

    mask = None
    if support is not None:
        mask = support.support_mask(X, j, grid)
        if mask is None:
            logger.warning(f"⚠️ 特征 {d.names[j]} 没有条件分布，支撑掩码全部标记为 True")
            mask = np.ones(values.shape, dtype=bool)
    return EffectCurve(kind='ice', feature=j, grid=grid, values=values,
                       support=mask, row_ids=rows, name=d.names[j])


def _check_bounds(bounds) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    bounds = tuple(tuple(float(v) for v in axis) for axis in bounds)
    if len(bounds) != 2 or any(len(axis) != 2 for axis in bounds):
        raise DataError(f"预测网格只支持二维: {bounds}")
    for lo, hi in bounds:
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise DataError(f"网格边界无效: ({lo}, {hi})")
    return bounds


def prediction_grid(models: Sequence[Predictor], bounds=((0.0, 1.0), (0.0, 1.0)),
                    resolution: Tuple[int, int] = DEFAULT_FIELD_RESOLUTION,
                    training_points: Optional[np.ndarray] = None, n_jobs: int = 1) -> GridField:
    """
    二维网格上多个模型预测的均值场与逐点标准差场（总体标准差，ddof=0）

    单个模型时标准差场恒为 0。
    """
    bounds = _check_bounds(bounds)
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != 2 or min(resolution) < 2:
        raise DataError(f"网格分辨率无效: {resolution}")
    models = list(models)
    if not models:
        raise DataError("至少需要一个模型")

    a1 = np.linspace(bounds[0][0], bounds[0][1], resolution[0])
    a2 = np.linspace(bounds[1][0], bounds[1][1], resolution[1])
    g1, g2 = np.meshgrid(a1, a2)
    points = np.column_stack([g1.ravel(), g2.ravel()])

    def evaluate(model):
        return np.asarray(model.predict(points), dtype=np.float64)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            surfaces = list(pool.map(evaluate, models))
    else:
        surfaces = [evaluate(m) for m in models]
    stack = np.vstack(surfaces)
    shape = (resolution[1], resolution[0])
    mean = stack.mean(axis=0).reshape(shape)
    sd = stack.std(axis=0).reshape(shape) if len(models) > 1 else np.zeros(shape)
    return GridField(bounds=bounds, resolution=resolution, mean=mean, sd=sd,
                     n_models=len(models), training_points=training_points)


def permutation_queries(d: Dataset, j: int, rng: RngLike = None) -> np.ndarray:
    """置换-预测实际查询模型的点：第 j 列被随机置换后的设计矩阵"""
    check_feature_index(d, j)
    gen = as_generator(rng)
    X = np.array(d.features)
    X[:, j] = X[Permutation.random(d.n_rows, gen).order, j]
    return X


def curve_ensemble(curves: Sequence[EffectCurve]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    多个重复模型的 PD 曲线逐网格点汇总

    Returns:
        Tuple: (网格, 均值, 标准差)
    """
    curves = list(curves)
    if not curves:
        raise DataError("没有可汇总的曲线")
    grid = curves[0].grid
    for c in curves:
        if c.kind != 'pd':
            raise DataError("只能汇总 PD 曲线")
        if c.grid.shape != grid.shape or not np.array_equal(c.grid, grid):
            raise DataError("曲线的网格不一致")
    stack = np.vstack([c.values for c in curves])
    return grid, stack.mean(axis=0), stack.std(axis=0)


def region_contrast(field: GridField, values: np.ndarray, far: float = 0.5,
                    band: float = 0.1) -> Tuple[float, float]:
    """
    比较远离对角线（|x1 − x2| > far）与对角带（|x1 − x2| ≤ band）格点上的平均值

    Returns:
        Tuple[float, float]: (远离对角线的均值, 对角带的均值)
    """
    values = np.asarray(values, dtype=np.float64)
    g1, g2 = field.coordinates()
    if values.shape != g1.shape:
        raise DataError(f"取值形状 {values.shape} 与网格 {g1.shape} 不一致")
    gap = np.abs(g1 - g2)
    off, near = gap > far, gap <= band
    if not off.any() or not near.any():
        raise DataError("网格在对角带或远离对角线的区域没有格点")
    return float(values[off].mean()), float(values[near].mean())
