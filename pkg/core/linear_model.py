#!/usr/bin/env python3
"""
线性回归模块
带截距的最小二乘，用列主元 QR 分解求解并检测秩亏
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import lstsq, qr, solve_triangular

from .dataset import Dataset, check_width
from .errors import SingularDesignError

logger = logging.getLogger(__name__)

# R 对角元相对最大对角元低于该阈值视为秩亏
RANK_TOLERANCE = 1e-10


def least_squares(A: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    求解 min ||A·c − b||²

    Args:
        A: 设计矩阵（已包含截距列）
        b: 目标向量

    Returns:
        Tuple[np.ndarray, np.ndarray]: (系数 c, 残差 b − A·c)

    Raises:
        SingularDesignError: A 列不满秩
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, k = A.shape
    if n < k:
        raise SingularDesignError(f"行数 {n} 少于待估参数 {k}")
    Q, R, piv = qr(A, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0 or np.any(diag < RANK_TOLERANCE * diag[0]):
        rank = int(np.sum(diag >= RANK_TOLERANCE * (diag[0] if diag.size else 0.0)))
        raise SingularDesignError(f"设计矩阵秩亏: 秩 {rank} < 列数 {k}")
    permuted = solve_triangular(R, Q.T @ b)
    coef = np.empty(k)
    coef[piv] = permuted
    return coef, b - A @ coef


def with_intercept(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(X.shape[0]), X])


@dataclass(frozen=True, eq=False)
class LinearModel:
    """f(x) = β₀ + x·β，附带训练数据的列均值 x̄ⱼ"""

    beta0: float
    beta: np.ndarray
    column_means: np.ndarray

    kind = 'linear'

    @property
    def n_features(self) -> int:
        return self.beta.shape[0]

    def predict(self, X) -> np.ndarray:
        X = check_width(X, self.n_features)
        return self.beta0 + X @ self.beta


def fit_linear(d: Dataset, strict: bool = True) -> LinearModel:
    """
    最小二乘拟合 Σ(yᵢ − β₀ − xᵢβ)²

    Args:
        d: 训练数据
        strict: False 时秩亏设计取最小范数解（系数不唯一，拟合值唯一）

    Raises:
        SingularDesignError: N ≤ p，或 strict 时设计矩阵（含截距）秩亏
    """
    if d.n_rows <= d.n_features:
        raise SingularDesignError(f"最小二乘需要 N > p: N={d.n_rows}, p={d.n_features}")
    A = with_intercept(np.asarray(d.features))
    if strict:
        coef, _ = least_squares(A, d.response)
    else:
        coef, _, rank, _ = lstsq(A, np.asarray(d.response), cond=RANK_TOLERANCE)
        if rank < A.shape[1]:
            logger.warning(f"⚠️ 设计矩阵秩亏 (秩 {rank} < 列数 {A.shape[1]})，使用最小范数解")
    return LinearModel(beta0=float(coef[0]), beta=coef[1:].copy(),
                       column_means=np.asarray(d.features).mean(axis=0))


def predict_linear(m: LinearModel, X) -> np.ndarray:
    return m.predict(X)
