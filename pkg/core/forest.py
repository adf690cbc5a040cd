#!/usr/bin/env python3
"""
随机森林模块
CART 回归树 + bootstrap 袋装，保留每棵树的袋内计数和叶节点成员，
用于袋外（OOB）预测和叶节点近邻（pNN）分析
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset, check_width
from .errors import DataError, NotFittedError

logger = logging.getLogger(__name__)

DEFAULT_FOREST_CONFIG = {
    'n_trees': 500,
    'mtry': None,          # None 表示 max(1, floor(p/3))
    'min_leaf': 5,
    'bootstrap': True,
    'seed': 0,
    'n_jobs': 1,
}


def resolve_forest_config(config: Optional[Dict], p: int) -> Dict:
    merged = dict(DEFAULT_FOREST_CONFIG)
    merged.update(config or {})
    if merged['mtry'] is None:
        merged['mtry'] = max(1, p // 3)
    merged['mtry'] = int(min(max(1, merged['mtry']), p))
    merged['n_trees'] = int(merged['n_trees'])
    merged['min_leaf'] = int(merged['min_leaf'])
    merged['seed'] = int(merged['seed'])
    merged['bootstrap'] = bool(merged['bootstrap'])
    if merged['n_trees'] < 1:
        raise DataError(f"树的数量必须 ≥ 1: {merged['n_trees']}")
    if merged['min_leaf'] < 1:
        raise DataError(f"最小叶节点样本数必须 ≥ 1: {merged['min_leaf']}")
    return merged


@dataclass(eq=False)
class RegressionTree:
    """扁平数组存储的回归树；feature == -1 表示叶节点"""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    # 叶节点 -> 落入该叶的 bootstrap 行号（含重复，已排序）
    leaf_members: Dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """返回每一行所落入的叶节点编号"""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            current = node[idx]
            go_left = X[idx, self.feature[current]] <= self.threshold[current]
            node[idx] = np.where(go_left, self.left[current], self.right[current])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def _best_split(X: np.ndarray, y: np.ndarray, rows: np.ndarray,
                candidates: Sequence[int], min_leaf: int) -> Optional[Tuple[int, float]]:
    """
    在候选特征中寻找方差下降最大的切分

    两侧都至少保留 min_leaf 行；阈值取相邻不同取值的中点。
    同等下降时取特征索引小者，同一特征内取阈值小者。
    """
    ys = y[rows]
    n = rows.shape[0]
    total = ys.sum()
    base = total * total / n
    positions = np.arange(min_leaf, n - min_leaf + 1)
    if positions.size == 0:
        return None

    best_gain, best = 0.0, None
    for f in candidates:
        x = X[rows, f]
        order = np.argsort(x, kind='stable')
        xs = x[order]
        valid = xs[positions - 1] < xs[positions]
        if not valid.any():
            continue
        left_sum = np.cumsum(ys[order])[positions - 1]
        right_sum = total - left_sum
        score = left_sum ** 2 / positions + right_sum ** 2 / (n - positions)
        score = np.where(valid, score, -np.inf)
        k = int(np.argmax(score))
        gain = score[k] - base
        if gain > best_gain:
            i = positions[k]
            best_gain, best = gain, (int(f), 0.5 * (xs[i - 1] + xs[i]))
    return best


def grow_tree(X: np.ndarray, y: np.ndarray, sample: np.ndarray, mtry: int,
              min_leaf: int, rng: np.random.Generator) -> RegressionTree:
    """
    在 bootstrap 样本上递归二分生长一棵树

    节点行数 < 2·min_leaf 或响应方差为 0 时停止。
    """
    p = X.shape[1]
    features: List[int] = []
    thresholds: List[float] = []
    lefts: List[int] = []
    rights: List[int] = []
    values: List[float] = []
    members: Dict[int, np.ndarray] = {}

    def new_node(rows: np.ndarray) -> int:
        features.append(-1)
        thresholds.append(np.nan)
        lefts.append(-1)
        rights.append(-1)
        values.append(float(np.mean(y[rows])))
        return len(features) - 1

    stack = [(new_node(sample), sample)]
    while stack:
        node, rows = stack.pop()
        split = None
        if rows.shape[0] >= 2 * min_leaf and np.ptp(y[rows]) > 0:
            candidates = np.sort(rng.choice(p, size=mtry, replace=False))
            split = _best_split(X, y, rows, candidates, min_leaf)
        if split is None:
            members[node] = np.sort(rows)
            continue
        f, thr = split
        go_left = X[rows, f] <= thr
        left_rows, right_rows = rows[go_left], rows[~go_left]
        left, right = new_node(left_rows), new_node(right_rows)
        features[node], thresholds[node] = f, thr
        lefts[node], rights[node] = left, right
        stack.append((right, right_rows))
        stack.append((left, left_rows))

    return RegressionTree(
        feature=np.asarray(features, dtype=np.int64),
        threshold=np.asarray(thresholds, dtype=np.float64),
        left=np.asarray(lefts, dtype=np.int64),
        right=np.asarray(rights, dtype=np.int64),
        value=np.asarray(values, dtype=np.float64),
        leaf_members=members,
    )


@dataclass(eq=False)
class ForestModel:
    """随机森林：树列表 + 袋内计数矩阵 (树数 × 训练行数) + 配置回显"""

    trees: List[RegressionTree]
    inbag: np.ndarray
    config: Dict
    n_features: int

    kind = 'forest'

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_train(self) -> int:
        return self.inbag.shape[1]

    def tree_predictions(self, X) -> np.ndarray:
        if not self.trees:
            raise NotFittedError("森林没有任何树，无法预测")
        X = check_width(X, self.n_features)
        return np.vstack([tree.predict(X) for tree in self.trees])

    def predict(self, X) -> np.ndarray:
        return self.tree_predictions(X).mean(axis=0)

    def subset(self, trees: Sequence[int]) -> 'ForestModel':
        trees = list(trees)
        if not trees:
            raise DataError("树的子集不能为空")
        return ForestModel([self.trees[t] for t in trees], self.inbag[trees],
                           dict(self.config), self.n_features)

    def tree_predictor(self, t: int) -> 'ForestModel':
        return self.subset([t])

    def split_features(self) -> set:
        """所有树中至少被切分过一次的特征"""
        used = set()
        for tree in self.trees:
            used.update(int(f) for f in tree.feature[tree.feature >= 0])
        return used


@dataclass(frozen=True, eq=False)
class OOBPredictions:
    predictions: np.ndarray   # 没有袋外树的行为 NaN
    n_trees: np.ndarray       # 每行的袋外树数量
    missing: np.ndarray       # 没有任何袋外树的行


def _fit_one_tree(X, y, n, cfg, seed_seq) -> Tuple[RegressionTree, np.ndarray]:
    rng = np.random.default_rng(seed_seq)
    if cfg['bootstrap']:
        sample = rng.integers(0, n, size=n)
    else:
        sample = np.arange(n)
    tree = grow_tree(X, y, sample, cfg['mtry'], cfg['min_leaf'], rng)
    return tree, np.bincount(sample, minlength=n)


def fit_forest(d: Dataset, config: Optional[Dict] = None) -> ForestModel:
    """
    训练随机森林

    Args:
        d: 训练数据
        config: n_trees, mtry, min_leaf, bootstrap, seed, n_jobs

    Returns:
        ForestModel: 每棵树使用由 (seed, 树编号) 派生的独立随机流，结果与并行调度无关
    """
    cfg = resolve_forest_config(config, d.n_features)
    n = d.n_rows
    if n < cfg['min_leaf']:
        raise DataError(f"样本量 {n} 小于最小叶节点样本数 {cfg['min_leaf']}")
    if n < 2 * cfg['min_leaf']:
        logger.warning(f"⚠️ 样本量 {n} < 2×min_leaf，每棵树都只有一个叶节点")

    X = np.ascontiguousarray(d.features)
    y = np.asarray(d.response)
    seeds = np.random.SeedSequence(cfg['seed']).spawn(cfg['n_trees'])
    jobs = max(1, int(cfg.get('n_jobs', 1)))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda s: _fit_one_tree(X, y, n, cfg, s), seeds))
    else:
        results = [_fit_one_tree(X, y, n, cfg, s) for s in seeds]

    trees = [tree for tree, _ in results]
    inbag = np.vstack([counts for _, counts in results])
    logger.debug(f"🌲 森林训练完成: {cfg['n_trees']} 棵树, mtry={cfg['mtry']}, min_leaf={cfg['min_leaf']}")
    return ForestModel(trees=trees, inbag=inbag, config=cfg, n_features=d.n_features)


def predict_forest(m: ForestModel, X) -> np.ndarray:
    return m.predict(X)


def oob_predictions(m: ForestModel, d: Dataset) -> OOBPredictions:
    """每行只平均该行袋内计数为 0 的树；没有袋外树的行标记为缺失"""
    if d.n_rows != m.n_train:
        raise DataError(f"行数 {d.n_rows} 与森林训练行数 {m.n_train} 不一致")
    per_tree = m.tree_predictions(d.features)
    oob = m.inbag == 0
    counts = oob.sum(axis=0)
    sums = np.where(oob, per_tree, 0.0).sum(axis=0)
    missing = counts == 0
    with np.errstate(invalid='ignore', divide='ignore'):
        predictions = np.where(missing, np.nan, sums / np.maximum(counts, 1))
    return OOBPredictions(predictions=predictions, n_trees=counts, missing=missing)


def leaf_comembers(m: ForestModel, x) -> List[np.ndarray]:
    """
    查询点的潜在近邻：每棵树中与 x 落入同一叶节点的训练行

    Returns:
        List[np.ndarray]: 每棵树一个数组（bootstrap 行号，含重复）；
                          用 np.unique 得到行集合
    """
    x = check_width(x, m.n_features)
    if x.shape[0] != 1:
        raise DataError("leaf_comembers 只接受单个查询点")
    if not np.all(np.isfinite(x)):
        raise DataError("查询点包含非有限值")
    return [tree.leaf_members[int(tree.apply(x)[0])] for tree in m.trees]
