#!/usr/bin/env python3
"""
理论基准模块
线性模型下置换重要性、PD/ICE 的闭式结果，特征间线性依赖下 drop / 重学 / 条件重要性的目标值，
以及小样本全排列枚举的精确期望
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from utils.seeding import RngLike, as_generator
from .dataset import Dataset, check_feature_index, check_width, squared_loss
from .errors import DataError, UnsupportedConditionalError
from .learners import Predictor
from .linear_model import LinearModel, least_squares
from .synthgen import CopulaSpec, conditional_sample

logger = logging.getLogger(__name__)

MAX_ENUMERATION_ROWS = 8
ENUMERATION_BLOCK = 5040
DEFAULT_N_MC = 5000
# 条件方差蒙特卡洛按行分块，控制 (块行数 × n_mc) 的内存
MC_CHUNK_ROWS = 256


@dataclass(frozen=True, eq=False)
class LinearOracle:
    beta0: float
    beta: np.ndarray
    column_means: np.ndarray
    centered_ss: np.ndarray     # Sⱼ = Σᵢ (xᵢⱼ − x̄ⱼ)²

    @classmethod
    def from_model(cls, model: LinearModel, d: Dataset) -> 'LinearOracle':
        if model.n_features != d.n_features:
            raise DataError(f"模型特征数 {model.n_features} 与数据列数 {d.n_features} 不一致")
        X = np.asarray(d.features)
        means = X.mean(axis=0)
        ss = np.sum((X - means) ** 2, axis=0)
        return cls(beta0=float(model.beta0), beta=np.asarray(model.beta, dtype=np.float64),
                   column_means=means, centered_ss=ss)

    @property
    def n_features(self) -> int:
        return self.beta.shape[0]


@dataclass(frozen=True, eq=False)
class DependenceEntry:
    """第 j 列对其余列（含截距）的最小二乘回归"""

    feature: int
    gamma0: float
    gamma: np.ndarray
    residuals: np.ndarray
    residual_ss: float          # Dⱼ
    centered_ss: float          # Sⱼ
    conditional_variance: Optional[float] = None   # Vⱼ


@dataclass(frozen=True, eq=False)
class DependenceOracle:
    entries: Tuple[DependenceEntry, ...]

    @property
    def residual_ss(self) -> np.ndarray:
        return np.array([e.residual_ss for e in self.entries])

    @property
    def conditional_variance(self) -> Optional[np.ndarray]:
        values = [e.conditional_variance for e in self.entries]
        if any(v is None for v in values):
            return None
        return np.array(values, dtype=np.float64)


def _check_oracle_feature(o: LinearOracle, j: int):
    if not isinstance(j, (int, np.integer)) or not 0 <= j < o.n_features:
        raise DataError(f"特征索引越界: {j} (p={o.n_features})")


def theorem1_vi(o: LinearOracle) -> np.ndarray:
    """线性模型置换-预测重要性的期望：2β̂ⱼ²Sⱼ"""
    return 2.0 * o.beta ** 2 * o.centered_ss


def theorem1_pd_line(o: LinearOracle, j: int) -> Tuple[float, float]:
    """PD 直线：Cⱼ = β̂₀ + Σⱼ'≠ⱼ β̂ⱼ'x̄ⱼ'，斜率 β̂ⱼ"""
    _check_oracle_feature(o, j)
    others = np.arange(o.n_features) != j
    intercept = o.beta0 + float(np.dot(o.beta[others], o.column_means[others]))
    return intercept, float(o.beta[j])


def theorem1_ice_line(o: LinearOracle, row, j: int) -> Tuple[float, float]:
    """第 i 行的 ICE 直线：Cᵢ,ⱼ = β̂₀ + Σⱼ'≠ⱼ β̂ⱼ'xᵢⱼ'，斜率 β̂ⱼ"""
    _check_oracle_feature(o, j)
    row = check_width(row, o.n_features)[0]
    others = np.arange(o.n_features) != j
    intercept = o.beta0 + float(np.dot(o.beta[others], row[others]))
    return intercept, float(o.beta[j])


def regress_feature(d: Dataset, j: int) -> DependenceEntry:
    """
    第 j 列对其余列 + 截距做最小二乘

    Raises:
        SingularDesignError: 其余列（含截距）秩亏
    """
    check_feature_index(d, j)
    X = np.asarray(d.features)
    target = X[:, j]
    others = np.delete(X, j, axis=1)
    design = np.column_stack([np.ones(d.n_rows), others])
    coef, residuals = least_squares(design, target)
    centered = target - target.mean()
    return DependenceEntry(feature=j, gamma0=float(coef[0]), gamma=coef[1:].copy(),
                           residuals=residuals, residual_ss=float(residuals @ residuals),
                           centered_ss=float(centered @ centered))


def conditional_variance_sum(spec: CopulaSpec, X, j: int, n_mc: int = DEFAULT_N_MC,
                             rng: RngLike = None) -> float:
    """
    Vⱼ = Σᵢ var(xᵢⱼ | xᵢ,₋ⱼ)

    与其余特征独立的列（或 rho = 0）每行精确为 1/12；
    相关对中的列用每行 n_mc 个条件抽样估计（无偏样本方差），按行分块计算。
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.p:
        raise DataError(f"输入列数与 copula 特征数 {spec.p} 不一致")
    if not 0 <= j < spec.p:
        raise UnsupportedConditionalError(f"特征 {j} 没有可用的条件分布")
    n = X.shape[0]
    partner = spec.partner(j)
    if partner is None or spec.rho == 0:
        return n / 12.0
    if abs(spec.rho) == 1:
        return 0.0
    if n_mc < 2:
        raise DataError(f"蒙特卡洛抽样数必须 ≥ 2: {n_mc}")

    gen = as_generator(rng)
    given = np.clip(X[:, partner], 1e-6, 1.0 - 1e-6)
    total = 0.0
    for start in range(0, n, MC_CHUNK_ROWS):
        draws = conditional_sample(given[start:start + MC_CHUNK_ROWS], spec.rho, gen, size=(n_mc,))
        total += float(np.sum(np.var(draws, axis=1, ddof=1)))
    return total


def dependence_oracle(d: Dataset, spec: Optional[CopulaSpec] = None, n_mc: int = DEFAULT_N_MC,
                      rng: RngLike = None) -> DependenceOracle:
    """对每个特征做 regress_feature；给出 copula 设定时同时计算 Vⱼ"""
    gen = as_generator(rng)
    entries = []
    for j in range(d.n_features):
        entry = regress_feature(d, j)
        if spec is not None:
            v = conditional_variance_sum(spec, d.features, j, n_mc, gen)
            entry = replace(entry, conditional_variance=v)
        entries.append(entry)
    return DependenceOracle(entries=tuple(entries))


def theorem2_targets(dep: DependenceOracle, beta) -> Dict[str, np.ndarray]:
    """
    线性学习器下的目标值

    Returns:
        Dict: drop = βⱼ²Dⱼ，relearn = 2βⱼ²Dⱼ，conditional = 2βⱼ²Vⱼ（无 Vⱼ 时缺省），
              relearn_as_drop = βⱼ²Dⱼ（在原训练行上评估的重学度量实际收敛到的值）
    """
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    if beta.shape[0] != len(dep.entries):
        raise DataError(f"系数长度 {beta.shape[0]} 与特征数 {len(dep.entries)} 不一致")
    D = dep.residual_ss
    targets = {
        'drop': beta ** 2 * D,
        'relearn': 2.0 * beta ** 2 * D,
        'relearn_as_drop': beta ** 2 * D,
    }
    V = dep.conditional_variance
    if V is not None:
        targets['conditional'] = 2.0 * beta ** 2 * V
    return targets


def _block_loss(model: Predictor, X: np.ndarray, y: np.ndarray, j: int,
                perms: np.ndarray) -> float:
    stacked = np.tile(X, (perms.shape[0], 1))
    stacked[:, j] = X[perms, j].ravel()
    predictions = np.asarray(model.predict(stacked), dtype=np.float64)
    return float(np.sum((np.tile(y, perms.shape[0]) - predictions) ** 2))


def brute_force_vi(model: Predictor, d: Dataset, j: int, n_jobs: int = 1) -> float:
    """
    枚举第 j 列全部 N! 个置换，返回置换-预测损失差的精确平均

    Raises:
        DataError: N > 8
    """
    check_feature_index(d, j)
    n = d.n_rows
    if n > MAX_ENUMERATION_ROWS:
        raise DataError(f"全排列枚举要求 N ≤ {MAX_ENUMERATION_ROWS}: N={n}")
    X = np.array(d.features)
    y = np.asarray(d.response)
    baseline = squared_loss(y, model.predict(X)).total

    permutations = itertools.permutations(range(n))
    blocks: List[np.ndarray] = []
    while True:
        block = list(itertools.islice(permutations, ENUMERATION_BLOCK))
        if not block:
            break
        blocks.append(np.asarray(block, dtype=np.int64))

    if n_jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            sums = list(pool.map(lambda b: _block_loss(model, X, y, j, b), blocks))
    else:
        sums = [_block_loss(model, X, y, j, b) for b in blocks]
    return math.fsum(sums) / math.factorial(n) - baseline


def joint_pair_importance(o: LinearOracle, d: Dataset, j: int, k: int) -> float:
    """特征对的联合重要性 Σᵢ(β̂ⱼ(xᵢⱼ−x̄ⱼ) + β̂ₖ(xᵢₖ−x̄ₖ))²"""
    _check_oracle_feature(o, j)
    _check_oracle_feature(o, k)
    if j == k:
        raise DataError(f"联合重要性需要两个不同的特征: {j}")
    if d.n_features != o.n_features:
        raise DataError(f"数据列数 {d.n_features} 与模型特征数 {o.n_features} 不一致")
    X = np.asarray(d.features)
    combined = (o.beta[j] * (X[:, j] - o.column_means[j])
                + o.beta[k] * (X[:, k] - o.column_means[k]))
    return float(combined @ combined)


def normal_equation_residuals(model: Predictor, d: Dataset) -> np.ndarray:
    """Σᵢ (yᵢ − f(xᵢ))·xᵢⱼ 对每个 j；最小二乘拟合下全部为 0"""
    residual = np.asarray(d.response) - np.asarray(model.predict(d.features))
    return np.asarray(d.features).T @ residual


def oracle_frame(names: Sequence[str], linear: Optional[LinearOracle] = None,
                 targets: Optional[Dict[str, np.ndarray]] = None) -> pd.DataFrame:
    """理论值长表：feature, theorem, target_name, value"""
    records = []
    if linear is not None:
        for name, value in zip(names, theorem1_vi(linear)):
            records.append({'feature': name, 'theorem': 'linear_permutation',
                            'target_name': 'vi_pap', 'value': value})
    for target_name, values in sorted((targets or {}).items()):
        for name, value in zip(names, values):
            records.append({'feature': name, 'theorem': 'linear_dependence',
                            'target_name': target_name, 'value': value})
    return pd.DataFrame.from_records(records, columns=['feature', 'theorem', 'target_name', 'value'])
