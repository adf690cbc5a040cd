#!/usr/bin/env python3
"""
变量重要性模块
六种重要性度量（置换-预测、袋外、条件、去除、置换重学、条件重学）与排名汇总

符号约定：所有度量都是「破坏特征后的损失 − 基线损失」，有用特征得分为正。
分数是对 N 行损失的原始求和。
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from utils.seeding import RngLike, as_generator, derive_seed, spawn_seeds
from .dataset import Dataset, Permutation, check_feature_index, check_width, permute_column, rank_scores, replace_column, squared_loss
from .errors import DataError, SingularDesignError, UnsupportedConditionalError
from .forest import ForestModel
from .learners import Learner, Predictor
from .linear_model import fit_linear

logger = logging.getLogger(__name__)

PAP = 'PaP'
OOB = 'OOB'
COND = 'COND'
DROP = 'DROP'
PERM_RELEARN = 'PERM_RELEARN'
COND_RELEARN = 'COND_RELEARN'
MEASURES = (PAP, OOB, COND, DROP, PERM_RELEARN, COND_RELEARN)
DEFAULT_REPS = 10


@dataclass(frozen=True, eq=False)
class ImportanceReport:
    """某个度量在一个模型上的逐特征得分"""

    measure: str
    scores: np.ndarray
    names: Tuple[str, ...]
    n_reps: int
    baseline_loss: float
    seed: Optional[int]
    n_rows: int

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise DataError(f"未知的重要性度量: {self.measure}")
        scores = np.asarray(self.scores, dtype=np.float64)
        if not np.all(np.isfinite(scores)):
            raise DataError(f"{self.measure} 得分包含非有限值")
        if self.n_reps < 1:
            raise DataError(f"重复次数必须 ≥ 1: {self.n_reps}")
        object.__setattr__(self, 'scores', scores)

    @property
    def ranks(self) -> np.ndarray:
        return rank_scores(self.scores)

    def normalized(self) -> np.ndarray:
        """按 N 归一化后的得分（仅用于展示，排名不变）"""
        return self.scores / self.n_rows

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'measure': self.measure,
            'feature': list(self.names),
            'score': self.scores,
            'rank': self.ranks,
            'n_reps': self.n_reps,
            'seed': '' if self.seed is None else self.seed,
        })


@dataclass(frozen=True, eq=False)
class RankTable:
    measure: str
    names: Tuple[str, ...]
    ranks: np.ndarray          # (重复数, p)
    label: str = ''

    @property
    def mean_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'measure': self.measure,
            'label': self.label,
            'feature': list(self.names),
            'mean_rank': self.mean_ranks,
            'n_replicates': self.ranks.shape[0],
        })


def _check_reps(n_reps: int):
    if n_reps < 1:
        raise DataError(f"重复次数必须 ≥ 1: {n_reps}")


def _loss(model: Predictor, d: Dataset, X=None) -> float:
    X = d.features if X is None else X
    return squared_loss(d.response, model.predict(X)).total


def _check_model_width(model: Predictor, d: Dataset):
    width = getattr(model, 'n_features', d.n_features)
    if width != d.n_features:
        raise DataError(f"模型特征数 {width} 与数据列数 {d.n_features} 不一致")


def vi_pap(model: Predictor, d: Dataset, j: int, n_reps: int = DEFAULT_REPS,
           rng: RngLike = None, baseline: Optional[float] = None) -> float:
    """
    置换-预测重要性 VIπ

    Returns:
        float: n_reps 次随机置换的平均 [Σ L(yᵢ, f(xᵢπ,ʲ)) − Σ L(yᵢ, f(xᵢ))]
    """
    check_feature_index(d, j)
    _check_model_width(model, d)
    _check_reps(n_reps)
    gen = as_generator(rng)
    base = _loss(model, d) if baseline is None else baseline
    diffs = []
    for _ in range(n_reps):
        permuted = permute_column(d, j, Permutation.random(d.n_rows, gen))
        diffs.append(_loss(model, d, permuted.features) - base)
    return float(np.mean(diffs))


def vi_oob(m: ForestModel, d: Dataset, j: int, n_reps: int = DEFAULT_REPS,
           rng: RngLike = None) -> float:
    """
    袋外置换重要性

    每棵树只在自己的袋外行上比较置换前后的平方损失之和，对树取平均，
    不做标准差缩放；没有袋外行的树跳过。
    """
    check_feature_index(d, j)
    _check_reps(n_reps)
    if d.n_rows != m.n_train:
        raise DataError(f"行数 {d.n_rows} 与森林训练行数 {m.n_train} 不一致")
    gen = as_generator(rng)
    X = np.asarray(d.features)
    y = np.asarray(d.response)
    oob_rows = [np.nonzero(m.inbag[t] == 0)[0] for t in range(m.n_trees)]
    baselines = {}
    for t, rows in enumerate(oob_rows):
        if rows.size:
            baselines[t] = squared_loss(y[rows], m.trees[t].predict(X[rows])).total
    if not baselines:
        logger.warning("⚠️ 所有树都没有袋外行，袋外重要性记为 0")
        return 0.0

    rep_scores = []
    for _ in range(n_reps):
        tree_diffs = []
        for t, rows in enumerate(oob_rows):
            if t not in baselines:
                continue
            Xt = X[rows].copy()
            Xt[:, j] = Xt[gen.permutation(rows.size), j]
            permuted = squared_loss(y[rows], m.trees[t].predict(Xt)).total
            tree_diffs.append(permuted - baselines[t])
        rep_scores.append(np.mean(tree_diffs))
    return float(np.mean(rep_scores))


def _check_sampler(sampler, j: int):
    if sampler is None or not sampler.supports(j):
        raise UnsupportedConditionalError(f"特征 {j} 没有可用的条件分布")


def vi_conditional(model: Predictor, d: Dataset, j: int, sampler, n_reps: int = DEFAULT_REPS,
                   rng: RngLike = None, baseline: Optional[float] = None) -> float:
    """条件重要性 VIᶜ：第 j 列按 xⱼ | x₋ⱼ 重新抽样后的损失增加"""
    check_feature_index(d, j)
    _check_model_width(model, d)
    _check_reps(n_reps)
    _check_sampler(sampler, j)
    gen = as_generator(rng)
    base = _loss(model, d) if baseline is None else baseline
    diffs = []
    for _ in range(n_reps):
        simulated = replace_column(d, j, sampler.sample(d.features, j, gen))
        diffs.append(_loss(model, d, simulated.features) - base)
    return float(np.mean(diffs))


def _fit_collinear(learner: Learner, d: Dataset) -> Predictor:
    try:
        return learner.fit(d)
    except SingularDesignError:
        # 完全共线的列：取最小范数解，拟合值仍唯一
        if learner.kind != 'linear':
            raise
        return fit_linear(d, strict=False)


def vi_drop(learner: Learner, d: Dataset, j: int, baseline_model: Optional[Predictor] = None) -> float:
    """去除重要性 VIᴰ（LOCO）：去掉第 j 列重新训练后训练误差的增加"""
    check_feature_index(d, j)
    if d.n_features == 1:
        raise DataError("只有一个特征，无法计算去除重要性")
    full = _fit_collinear(learner, d) if baseline_model is None else baseline_model
    dropped_data = d.drop_column(j)
    dropped = _fit_collinear(learner, dropped_data)
    return _loss(dropped, dropped_data) - _loss(full, d)


def _relearn(learner: Learner, d: Dataset, j: int, n_reps: int, rng: RngLike,
             baseline_model: Optional[Predictor],
             make_column: Callable[[np.random.Generator], np.ndarray]) -> float:
    check_feature_index(d, j)
    _check_reps(n_reps)
    gen = as_generator(rng)
    full = learner.fit(d) if baseline_model is None else baseline_model
    base = _loss(full, d)
    diffs = []
    for seed in spawn_seeds(gen, n_reps):
        altered = replace_column(d, j, make_column(gen))
        refit = learner.with_seed(seed).fit(altered)
        # 在原始（未置换）行上评估
        diffs.append(_loss(refit, d) - base)
    return float(np.mean(diffs))


def vi_permute_relearn(learner: Learner, d: Dataset, j: int, n_reps: int = DEFAULT_REPS,
                       rng: RngLike = None, baseline_model: Optional[Predictor] = None) -> float:
    """置换重学重要性 VIπᴸ：在 (y, Xπ,ʲ) 上重新训练，在原始行上比较损失"""
    column = np.asarray(d.features[:, j]) if 0 <= j < d.n_features else None
    return _relearn(learner, d, j, n_reps, rng, baseline_model,
                    lambda gen: column[gen.permutation(d.n_rows)])


def vi_condition_relearn(learner: Learner, d: Dataset, j: int, sampler, n_reps: int = DEFAULT_REPS,
                         rng: RngLike = None, baseline_model: Optional[Predictor] = None) -> float:
    """条件重学重要性 VIᶜᴸ：在 (y, Xᶜ,ʲ) 上重新训练，在原始行上比较损失"""
    check_feature_index(d, j)
    _check_sampler(sampler, j)
    return _relearn(learner, d, j, n_reps, rng, baseline_model,
                    lambda gen: sampler.sample(d.features, j, gen))


def importance_report(measure: str, d: Dataset, model: Optional[Predictor] = None,
                      learner: Optional[Learner] = None, sampler=None,
                      n_reps: int = DEFAULT_REPS, seed: int = 0,
                      features: Optional[Sequence[int]] = None) -> ImportanceReport:
    """
    对所有特征计算一个度量

    每个特征使用由 (seed, 特征编号, 度量) 派生的独立随机流，特征的计算顺序不影响结果。

    Args:
        measure: MEASURES 之一
        d: 数据集
        model: 已训练模型（PaP / OOB / COND 需要；重学类作为基线模型复用）
        learner: 训练过程（DROP / PERM_RELEARN / COND_RELEARN 需要）
        sampler: 条件分布提供者（COND / COND_RELEARN 需要）
        n_reps: 置换或模拟重复次数
        seed: 主种子
        features: 只计算这些特征（默认全部），其余得分为 0
    """
    if measure not in MEASURES:
        raise DataError(f"未知的重要性度量: {measure}")
    if measure in (DROP, PERM_RELEARN, COND_RELEARN) and learner is None:
        raise DataError(f"{measure} 需要提供学习器")
    if model is None:
        if learner is None:
            raise DataError(f"{measure} 需要提供模型或学习器")
        model = learner.fit(d)
    if measure == OOB and not isinstance(model, ForestModel):
        raise DataError("袋外重要性只适用于随机森林")

    base = _loss(model, d)
    targets = range(d.n_features) if features is None else features
    scores = np.zeros(d.n_features)
    for j in targets:
        stream = derive_seed(seed, j, measure.lower())
        if measure == PAP:
            scores[j] = vi_pap(model, d, j, n_reps, stream, baseline=base)
        elif measure == OOB:
            scores[j] = vi_oob(model, d, j, n_reps, stream)
        elif measure == COND:
            scores[j] = vi_conditional(model, d, j, sampler, n_reps, stream, baseline=base)
        elif measure == DROP:
            scores[j] = vi_drop(learner, d, j, baseline_model=model)
        elif measure == PERM_RELEARN:
            scores[j] = vi_permute_relearn(learner, d, j, n_reps, stream, baseline_model=model)
        else:
            scores[j] = vi_condition_relearn(learner, d, j, sampler, n_reps, stream, baseline_model=model)

    reps = 1 if measure == DROP else n_reps
    return ImportanceReport(measure=measure, scores=scores, names=d.names, n_reps=reps,
                            baseline_loss=base, seed=seed, n_rows=d.n_rows)


def aggregate_ranks(reports: List[ImportanceReport], label: str = '') -> RankTable:
    """逐个重复计算排名，再按特征取平均"""
    if not reports:
        raise DataError("没有可汇总的重要性报告")
    measures = {r.measure for r in reports}
    if len(measures) > 1:
        raise DataError(f"报告的度量不一致: {sorted(measures)}")
    widths = {r.scores.shape[0] for r in reports}
    if len(widths) > 1:
        raise DataError(f"报告的特征数不一致: {sorted(widths)}")
    ranks = np.vstack([r.ranks for r in reports])
    return RankTable(measure=reports[0].measure, names=reports[0].names, ranks=ranks, label=label)
