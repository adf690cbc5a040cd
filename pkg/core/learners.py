#!/usr/bin/env python3
"""
学习器模块
统一三类模型的训练接口（Learner）和预测接口（Predictor），以及模型的保存 / 加载
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Protocol, Union

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError
from .forest import ForestModel, RegressionTree, fit_forest
from .linear_model import LinearModel, fit_linear
from .mlp import MLPModel, fit_mlp

logger = logging.getLogger(__name__)

LEARNER_KINDS = ('linear', 'forest', 'mlp')
FORMAT_VERSION = 1


class Predictor(Protocol):
    kind: str

    def predict(self, X) -> np.ndarray:
        ...


@dataclass(frozen=True)
class Learner:
    """
    训练过程：kind + 配置

    with_seed 复制配置并替换种子，重新学习类重要性用它为每次重复生成新模型。
    """

    kind: str
    config: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ConfigError(f"未知的学习器类型: {self.kind}，可选 {LEARNER_KINDS}")

    @property
    def name(self) -> str:
        return self.kind

    def fit(self, d: Dataset) -> Predictor:
        if self.kind == 'linear':
            return fit_linear(d)
        if self.kind == 'forest':
            return fit_forest(d, self.config)
        return fit_mlp(d, self.config)

    def with_seed(self, seed: int) -> 'Learner':
        if self.kind == 'linear':
            return self
        config = dict(self.config)
        config['seed'] = int(seed)
        return Learner(self.kind, config)


def make_learner(kind: str, config: Optional[Dict] = None) -> Learner:
    return Learner(kind, dict(config or {}))


def _model_to_document(model) -> Dict:
    if isinstance(model, LinearModel):
        params = {
            'beta0': model.beta0,
            'beta': model.beta.tolist(),
            'column_means': model.column_means.tolist(),
        }
        return {'kind': 'linear', 'config': {}, 'params': params}
    if isinstance(model, ForestModel):
        trees = []
        for tree in model.trees:
            trees.append({
                'feature': tree.feature.tolist(),
                'threshold': [None if np.isnan(t) else t for t in tree.threshold.tolist()],
                'left': tree.left.tolist(),
                'right': tree.right.tolist(),
                'value': tree.value.tolist(),
                'leaf_members': {str(k): v.tolist() for k, v in sorted(tree.leaf_members.items())},
            })
        params = {'n_features': model.n_features, 'inbag': model.inbag.tolist(), 'trees': trees}
        return {'kind': 'forest', 'config': model.config, 'params': params}
    if isinstance(model, MLPModel):
        params = {
            'W1': model.W1.tolist(), 'b1': model.b1.tolist(),
            'w2': model.w2.tolist(), 'b2': model.b2,
            'x_mean': model.x_mean.tolist(), 'x_scale': model.x_scale.tolist(),
            'y_mean': model.y_mean, 'n_iter': model.n_iter,
            'final_loss': model.final_loss, 'grad_norm': model.grad_norm,
            'converged': model.converged,
        }
        return {'kind': 'mlp', 'config': model.config, 'params': params}
    raise DataError(f"不支持保存的模型类型: {type(model).__name__}")


def save_model(model, path: Union[str, Path]) -> Path:
    """
    保存模型为自描述 JSON：{"format", "kind", "config", "params"}

    json 按 repr 写出浮点数，十进制可以精确往返。
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {'format': FORMAT_VERSION}
    document.update(_model_to_document(model))
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, ensure_ascii=False, sort_keys=True)
    logger.info(f"💾 已保存 {document['kind']} 模型: {path}")
    return path


def load_model(path: Union[str, Path]):
    path = Path(path)
    if not path.exists():
        raise DataError(f"模型文件不存在: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        document = json.load(f)
    kind, params = document.get('kind'), document.get('params', {})
    if kind == 'linear':
        return LinearModel(beta0=params['beta0'], beta=np.asarray(params['beta'], dtype=np.float64),
                           column_means=np.asarray(params['column_means'], dtype=np.float64))
    if kind == 'forest':
        trees = []
        for t in params['trees']:
            trees.append(RegressionTree(
                feature=np.asarray(t['feature'], dtype=np.int64),
                threshold=np.asarray([np.nan if v is None else v for v in t['threshold']], dtype=np.float64),
                left=np.asarray(t['left'], dtype=np.int64),
                right=np.asarray(t['right'], dtype=np.int64),
                value=np.asarray(t['value'], dtype=np.float64),
                leaf_members={int(k): np.asarray(v, dtype=np.int64) for k, v in t['leaf_members'].items()},
            ))
        return ForestModel(trees=trees, inbag=np.asarray(params['inbag'], dtype=np.int64),
                           config=document.get('config', {}), n_features=int(params['n_features']))
    if kind == 'mlp':
        return MLPModel(W1=np.asarray(params['W1'], dtype=np.float64),
                        b1=np.asarray(params['b1'], dtype=np.float64),
                        w2=np.asarray(params['w2'], dtype=np.float64), b2=params['b2'],
                        x_mean=np.asarray(params['x_mean'], dtype=np.float64),
                        x_scale=np.asarray(params['x_scale'], dtype=np.float64),
                        y_mean=params['y_mean'], config=document.get('config', {}),
                        n_iter=params['n_iter'], final_loss=params['final_loss'],
                        grad_norm=params['grad_norm'], converged=params['converged'])
    raise DataError(f"模型文件类型未知: {kind}")
