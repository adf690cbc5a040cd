#!/usr/bin/env python3
"""
合成数据生成模块
均匀边缘分布 + 一对特征之间的高斯 copula 相关，线性响应模型，
以及 copula 下精确的条件抽样和条件支撑区间
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from utils.seeding import RngLike, as_generator, derive_seed
from .dataset import Dataset
from .errors import ConfigError, DataError, UnsupportedConditionalError

logger = logging.getLogger(__name__)

# 线性模拟模型的系数：x1..x5 相同，x6 无影响，x7..x10 递增
BASE_BETA = (1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.5, 0.8, 1.2, 1.5)
BASE_SIGMA = 0.1


@dataclass(frozen=True)
class CopulaSpec:
    """p 个 Uniform[0,1] 特征，其中 pair 两列通过潜在相关系数 rho 的高斯 copula 相关"""

    p: int = 10
    pair: Tuple[int, int] = (0, 1)
    rho: float = 0.0

    def __post_init__(self):
        a, b = self.pair
        if self.p < 2:
            raise ConfigError(f"copula 需要至少 2 个特征: p={self.p}")
        if a == b or not (0 <= a < self.p and 0 <= b < self.p):
            raise ConfigError(f"相关特征对无效: {self.pair} (p={self.p})")
        if not np.isfinite(self.rho) or abs(self.rho) > 1:
            raise ConfigError(f"相关参数必须在 [-1, 1] 内: {self.rho}")
        object.__setattr__(self, 'pair', (int(a), int(b)))

    def partner(self, j: int) -> Optional[int]:
        a, b = self.pair
        if j == a:
            return b
        if j == b:
            return a
        return None


@dataclass(frozen=True)
class ResponseSpec:
    beta: Tuple[float, ...] = BASE_BETA
    beta0: float = 0.0
    sigma: float = BASE_SIGMA

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        if not all(np.isfinite(beta)) or not np.isfinite(self.beta0):
            raise ConfigError("响应系数必须有限")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ConfigError(f"噪声标准差必须非负: {self.sigma}")
        object.__setattr__(self, 'beta', beta)


def _check_conditional_args(x_given, rho: float) -> np.ndarray:
    x_given = np.asarray(x_given, dtype=np.float64)
    if not np.isfinite(rho) or abs(rho) >= 1:
        raise DataError(f"条件分布要求 |rho| < 1: {rho}")
    if np.any(~np.isfinite(x_given)) or np.any(x_given <= 0) or np.any(x_given >= 1):
        raise DataError("条件值必须严格位于 (0, 1) 内")
    return x_given


def sample_features(spec: CopulaSpec, n: int, rng: RngLike) -> np.ndarray:
    """
    生成 N×p 特征矩阵

    Args:
        spec: copula 设定
        n: 行数
        rng: 随机数流

    Returns:
        np.ndarray: 各列边缘为 Uniform[0,1]，仅 spec.pair 两列相关
    """
    if n < 1:
        raise DataError(f"样本量必须 ≥ 1: {n}")
    gen = as_generator(rng)
    X = gen.uniform(0.0, 1.0, size=(n, spec.p))
    z = gen.standard_normal(size=(n, 2))
    z2 = spec.rho * z[:, 0] + np.sqrt(max(0.0, 1.0 - spec.rho ** 2)) * z[:, 1]
    a, b = spec.pair
    X[:, a] = norm.cdf(z[:, 0])
    X[:, b] = norm.cdf(z2)
    return np.asfortranarray(X)


def conditional_sample(x_given, rho: float, rng: RngLike, size=None):
    """
    从 copula 条件分布抽样：Φ(z)，z ~ N(rho·Φ⁻¹(x_given), 1 − rho²)

    x_given 可以是标量或数组；size 为每个条件值额外的抽样维度（如 (n_mc,)）
    """
    x_given = _check_conditional_args(x_given, rho)
    gen = as_generator(rng)
    mean = rho * norm.ppf(x_given)
    shape = mean.shape if size is None else mean.shape + tuple(np.atleast_1d(size))
    if size is not None:
        mean = mean.reshape(mean.shape + (1,) * len(np.atleast_1d(size)))
    draws = norm.cdf(mean + np.sqrt(1.0 - rho ** 2) * gen.standard_normal(size=shape))
    return float(draws) if np.ndim(draws) == 0 else draws


def conditional_range(x_given, rho: float, k: float = 2.0):
    """条件支撑区间：潜在正态尺度上 ±k 个条件标准差，映射回 (0,1)"""
    x_given = _check_conditional_args(x_given, rho)
    if k <= 0:
        raise DataError(f"宽度倍数必须为正: {k}")
    center = rho * norm.ppf(x_given)
    half = k * np.sqrt(1.0 - rho ** 2)
    lo, hi = norm.cdf(center - half), norm.cdf(center + half)
    if np.ndim(lo) == 0:
        return float(lo), float(hi)
    return lo, hi


def gen_response(X: np.ndarray, spec: ResponseSpec, rng: RngLike) -> np.ndarray:
    """yᵢ = β₀ + Σⱼ βⱼ·xᵢⱼ + εᵢ，εᵢ ~ N(0, σ²) 独立同分布"""
    X = np.asarray(X, dtype=np.float64)
    beta = np.asarray(spec.beta)
    if X.ndim != 2 or X.shape[1] != beta.shape[0]:
        raise DataError(f"系数长度 {beta.shape[0]} 与特征列数 {X.shape[-1]} 不一致")
    gen = as_generator(rng)
    noise = gen.standard_normal(size=X.shape[0]) * spec.sigma
    return spec.beta0 + X @ beta + noise


def feature_names(p: int) -> Tuple[str, ...]:
    return tuple(f"x{j + 1}" for j in range(p))


def simulate_dataset(copula: CopulaSpec, response: ResponseSpec, n: int,
                     feature_rng: RngLike, noise_rng: RngLike) -> Dataset:
    """特征与噪声使用不同的流，改变噪声不会改变特征"""
    X = sample_features(copula, n, feature_rng)
    y = gen_response(X, response, noise_rng)
    return Dataset(X, y, feature_names(copula.p))


def extrapolation_design(n: int = 200, rho: float = 0.9, sigma: float = 0.05,
                         feature_rng: RngLike = None, noise_rng: RngLike = None) -> Dataset:
    """两特征外推演示：y = x1 + ε，x2 与响应无关但与 x1 相关"""
    copula = CopulaSpec(p=2, pair=(0, 1), rho=rho)
    return simulate_dataset(copula, ResponseSpec(beta=(1.0, 0.0), sigma=sigma), n,
                            feature_rng, noise_rng)


def generator_config(config: Dict) -> Tuple[CopulaSpec, ResponseSpec, int, int]:
    """
    解析生成器配置块

    Args:
        config: 包含 n, p, rho, pair, beta, sigma, seed 的字典（缺省取线性模拟模型）

    Returns:
        Tuple: (CopulaSpec, ResponseSpec, n, seed)
    """
    p = int(config.get('p', len(BASE_BETA)))
    beta = config.get('beta', BASE_BETA if p == len(BASE_BETA) else (1.0,) * p)
    if len(beta) != p:
        raise ConfigError(f"beta 长度 {len(beta)} 与 p={p} 不一致")
    pair = tuple(int(v) for v in config.get('pair', (0, 1)))
    copula = CopulaSpec(p=p, pair=pair, rho=float(config.get('rho', 0.0)))
    response = ResponseSpec(beta=tuple(beta), beta0=float(config.get('beta0', 0.0)),
                            sigma=float(config.get('sigma', BASE_SIGMA)))
    n = int(config.get('n', 2000))
    if n < 1:
        raise ConfigError(f"样本量必须 ≥ 1: {n}")
    seed = int(config.get('seed', 0))
    if seed < 0:
        raise ConfigError(f"种子必须非负: {seed}")
    return copula, response, n, seed


def generate_dataset(config: Dict) -> Dataset:
    """按生成器配置块生成数据集；特征和噪声各用一条由 seed 派生的流"""
    copula, response, n, seed = generator_config(config)
    logger.info(f"🎲 生成数据 n={n}, p={copula.p}, rho={copula.rho}, 种子 {seed}")
    return simulate_dataset(copula, response, n,
                            derive_seed(seed, 0, 'features'), derive_seed(seed, 0, 'noise'))


@dataclass(frozen=True)
class CopulaConditional:
    """
    copula 设计下 xⱼ | x₋ⱼ 的条件分布提供者

    相关对中的特征只依赖伙伴特征（解析条件分布）；其余特征与所有特征独立，
    条件分布即 Uniform[0,1] 边缘分布。
    """

    spec: CopulaSpec
    k: float = 2.0
    # 计算支撑区间时把伙伴值截到 (eps, 1-eps)，边界上 Φ⁻¹ 无定义
    eps: float = field(default=1e-6)

    def supports(self, j: int) -> bool:
        if not 0 <= j < self.spec.p:
            return False
        return self.spec.partner(j) is None or abs(self.spec.rho) < 1

    def _check(self, X: np.ndarray, j: int) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.spec.p:
            raise DataError(f"输入列数与 copula 特征数 {self.spec.p} 不一致")
        if not self.supports(j):
            raise UnsupportedConditionalError(f"特征 {j} 没有可用的条件分布")
        return X

    def sample(self, X: np.ndarray, j: int, rng: RngLike) -> np.ndarray:
        """对每一行抽取 xᵢⱼ ~ xⱼ | xᵢ,₋ⱼ"""
        X = self._check(X, j)
        gen = as_generator(rng)
        partner = self.spec.partner(j)
        if partner is None:
            return gen.uniform(0.0, 1.0, size=X.shape[0])
        given = np.clip(X[:, partner], self.eps, 1.0 - self.eps)
        return conditional_sample(given, self.spec.rho, gen)

    def support_mask(self, X: np.ndarray, j: int, grid: Sequence[float]) -> Optional[np.ndarray]:
        """
        ICE 支撑掩码：grid 点是否落在该行的条件 k 倍标准差区间内

        Returns:
            Optional[np.ndarray]: (行数, 网格点数) 布尔矩阵；非相关对特征全为 True；
                                  没有条件分布时返回 None
        """
        X = np.asarray(X, dtype=np.float64)
        grid = np.asarray(grid, dtype=np.float64)
        if not self.supports(j):
            return None
        partner = self.spec.partner(j)
        if partner is None:
            return np.ones((X.shape[0], grid.shape[0]), dtype=bool)
        given = np.clip(X[:, partner], self.eps, 1.0 - self.eps)
        lo, hi = conditional_range(given, self.spec.rho, self.k)
        lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
        return (grid[None, :] >= lo[:, None]) & (grid[None, :] <= hi[:, None])
