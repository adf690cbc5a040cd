#!/usr/bin/env python3
"""
单隐层神经网络模块
logistic 隐层 + 线性输出，全批量梯度下降（自适应步长），输入标准化、响应中心化
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from .dataset import Dataset, check_width
from .errors import DataError

logger = logging.getLogger(__name__)

DEFAULT_MLP_CONFIG = {
    'hidden': 20,
    'max_iter': 3000,
    'l2_decay': 0.0,
    'seed': 0,
    'init_scale': 1.0,
    'step': 0.5,
    'tol': 1e-7,
}

# 自适应步长：接受时放大，拒绝时缩小
STEP_GROW = 1.1
STEP_SHRINK = 0.5
MIN_STEP = 1e-12


@dataclass(eq=False)
class MLPModel:
    """
    W1: (hidden, p) 输入权重，b1: (hidden,) 偏置
    w2: (hidden,) 输出权重，b2: 输出偏置（标准化空间）
    """

    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    config: Dict
    n_iter: int = 0
    final_loss: float = float('nan')
    grad_norm: float = float('nan')
    converged: bool = False

    kind = 'mlp'

    @property
    def n_features(self) -> int:
        return self.W1.shape[1]

    def standardize(self, X) -> np.ndarray:
        X = check_width(X, self.n_features)
        return (X - self.x_mean) / self.x_scale

    def predict(self, X) -> np.ndarray:
        Z = self.standardize(X)
        hidden = expit(Z @ self.W1.T + self.b1)
        return hidden @ self.w2 + self.b2 + self.y_mean


def pack(W1, b1, w2, b2) -> np.ndarray:
    return np.concatenate([W1.ravel(), b1, w2, [b2]])


def unpack(theta: np.ndarray, hidden: int, p: int):
    k = hidden * p
    W1 = theta[:k].reshape(hidden, p)
    b1 = theta[k:k + hidden]
    w2 = theta[k + hidden:k + 2 * hidden]
    return W1, b1, w2, float(theta[-1])


def loss_and_gradient(theta: np.ndarray, Z: np.ndarray, yc: np.ndarray,
                      hidden: int, l2_decay: float = 0.0) -> Tuple[float, np.ndarray]:
    """
    均方误差（+ 权重衰减）及其反向传播梯度

    Args:
        theta: 打包后的参数向量
        Z: 标准化后的输入 (N, p)
        yc: 中心化后的响应
        hidden: 隐层单元数
        l2_decay: 输入/输出权重（不含偏置）的 L2 系数

    Returns:
        Tuple[float, np.ndarray]: (损失, 与 theta 同形的梯度)
    """
    n, p = Z.shape
    W1, b1, w2, b2 = unpack(theta, hidden, p)
    h = expit(Z @ W1.T + b1)
    residual = h @ w2 + b2 - yc
    loss = float(np.mean(residual ** 2)) + l2_decay * (np.sum(W1 ** 2) + np.sum(w2 ** 2))

    g = 2.0 * residual / n
    grad_w2 = h.T @ g + 2.0 * l2_decay * w2
    grad_b2 = g.sum()
    pre = np.outer(g, w2) * h * (1.0 - h)
    grad_W1 = pre.T @ Z + 2.0 * l2_decay * W1
    grad_b1 = pre.sum(axis=0)
    return loss, pack(grad_W1, grad_b1, grad_w2, grad_b2)


def fit_mlp(d: Dataset, config: Optional[Dict] = None) -> MLPModel:
    """
    训练单隐层网络

    初始化：输入权重 ~ U[-0.5, 0.5]·init_scale，输出权重和所有偏置为 0，
    因此 0 次迭代时预测恒等于响应均值。每次迭代只接受使损失下降的步，
    已接受迭代的训练损失单调不增。超过 max_iter 未收敛时返回最优迭代并标记。
    """
    cfg = dict(DEFAULT_MLP_CONFIG)
    cfg.update(config or {})
    hidden, max_iter = int(cfg['hidden']), int(cfg['max_iter'])
    if hidden < 1 or max_iter < 0:
        raise DataError(f"无效的网络配置: hidden={hidden}, max_iter={max_iter}")

    X = np.asarray(d.features)
    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale = np.where(x_scale > 0, x_scale, 1.0)
    Z = (X - x_mean) / x_scale
    y_mean = float(np.mean(d.response))
    yc = np.asarray(d.response) - y_mean

    rng = np.random.default_rng(int(cfg['seed']))
    W1 = rng.uniform(-0.5, 0.5, size=(hidden, d.n_features)) * float(cfg['init_scale'])
    theta = pack(W1, np.zeros(hidden), np.zeros(hidden), 0.0)

    l2 = float(cfg['l2_decay'])
    step = float(cfg['step'])
    loss, grad = loss_and_gradient(theta, Z, yc, hidden, l2)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < cfg['tol']:
            converged = True
            break
        candidate = theta - step * grad
        new_loss, new_grad = loss_and_gradient(candidate, Z, yc, hidden, l2)
        if new_loss <= loss:
            theta, loss, grad = candidate, new_loss, new_grad
            step *= STEP_GROW
        else:
            step *= STEP_SHRINK
            if step < MIN_STEP:
                converged = True
                break

    grad_norm = float(np.linalg.norm(grad))
    if max_iter > 0 and not converged:
        logger.warning(f"⚠️ 神经网络在 {max_iter} 次迭代内未收敛 (梯度范数 {grad_norm:.3g})，返回最优迭代")

    W1, b1, w2, b2 = unpack(theta, hidden, d.n_features)
    return MLPModel(W1=W1.copy(), b1=b1.copy(), w2=w2.copy(), b2=b2,
                    x_mean=x_mean, x_scale=x_scale, y_mean=y_mean, config=cfg,
                    n_iter=iterations if max_iter > 0 else 0, final_loss=loss,
                    grad_norm=grad_norm, converged=converged or max_iter == 0)


def predict_mlp(m: MLPModel, X) -> np.ndarray:
    return m.predict(X)
