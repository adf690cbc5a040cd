#!/usr/bin/env python3
"""
实验预设模块
每个预设定义：默认参数（桌面规模 / 完整规模）、单次重复的任务函数、汇总函数、输出写出函数。
重复任务的随机流全部由 (主种子, 重复编号, 用途标签) 派生，串行与并行运行的结果逐字节一致。
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from utils import svg_render
from utils.seeding import derive_seed
from .bikeshare import DEFAULT_SUBSAMPLE, BikeShareConfig, load_bikeshare, rank_comparison
from .dataset import Dataset
from .effects import (EffectCurve, curve_ensemble, default_grid, ice_curves, partial_dependence,
                      permutation_queries, prediction_grid, region_contrast)
from .errors import ConfigError, DiagnosticsError
from .forest import fit_forest, leaf_comembers
from .importance import (COND, COND_RELEARN, DROP, MEASURES, OOB, PAP, PERM_RELEARN, aggregate_ranks,
                         importance_report, vi_condition_relearn, vi_conditional, vi_drop, vi_pap,
                         vi_permute_relearn)
from .learners import Learner
from .linear_model import fit_linear
from .oracle import (LinearOracle, brute_force_vi, dependence_oracle, joint_pair_importance,
                     normal_equation_residuals, oracle_frame, theorem1_ice_line, theorem1_pd_line,
                     theorem1_vi, theorem2_targets)
from .run_manager import RunManager
from .synthgen import (BASE_BETA, BASE_SIGMA, CopulaConditional, CopulaSpec, ResponseSpec,
                       extrapolation_design, gen_response, simulate_dataset)

logger = logging.getLogger(__name__)

PRESET_IDS = ('fig1_ranks', 'fig2_grid', 'fig3_effects', 'fig4_contour', 'fig5_alternatives',
              'fig6_nn_variance', 'fig7_bikeshare', 'theorem_check')
DEFAULT_SEED = 20190101
RELEARN_MEASURES = (PERM_RELEARN, COND_RELEARN)
FIG2_BETA = (0.8, 0.8) + BASE_BETA[2:]
FLOAT_FORMAT = '%.17g'

# 桌面规模默认值；FULL_SETTINGS 中的键在 --full 时覆盖
DESK_SETTINGS: Dict[str, Dict] = {
    'fig1_ranks': {
        'n': 2000, 'rhos': [0.0, 0.9], 'reps': 10, 'n_reps': 5,
        'learners': ['forest', 'mlp', 'linear'],
        'forest': {'n_trees': 100, 'min_leaf': 5}, 'mlp': {'hidden': 20, 'max_iter': 1500},
    },
    'fig2_grid': {
        'ns': [100, 500, 2000], 'rhos': [0.0, 0.1, 0.25, 0.35, 0.5, 0.75, 0.9], 'reps': 5,
        'n_reps': 5, 'beta': list(FIG2_BETA), 'measures': [OOB, PAP],
        'forest': {'n_trees': 50, 'min_leaf': 5},
    },
    'fig3_effects': {
        'n': 2000, 'rho': 0.9, 'reps': 10, 'feature': 0, 'grid_points': 21, 'ice_rows': 11,
        'learners': ['forest', 'mlp', 'linear'],
        'forest': {'n_trees': 100, 'min_leaf': 5}, 'mlp': {'hidden': 20, 'max_iter': 1500},
    },
    'fig4_contour': {
        'n': 200, 'rho': 0.9, 'sigma': 0.05, 'reps': 30, 'pap_reps': 10, 'n_reps': 5,
        'resolution': [51, 51], 'queries': [[0.9, 0.1], [0.1, 0.9], [0.5, 0.5]],
        'forest': {'n_trees': 100, 'min_leaf': 5},
    },
    'fig5_alternatives': {
        'n': 200, 'rhos': [0.0, 0.9], 'reps': 10, 'n_reps': 5, 'relearn_reps': 3,
        'learners': ['forest', 'mlp', 'linear'], 'measures': [COND, DROP, PERM_RELEARN, COND_RELEARN],
        'forest': {'n_trees': 50, 'min_leaf': 5}, 'mlp': {'hidden': 20, 'max_iter': 1000},
    },
    'fig6_nn_variance': {
        'n': 200, 'rho': 0.9, 'sigma': 0.05, 'reps': 30, 'resolution': [51, 51],
        'mlp': {'hidden': 20, 'max_iter': 2000},
    },
    'fig7_bikeshare': {
        'reps': 1, 'path': None, 'subsample': DEFAULT_SUBSAMPLE, 'n_reps': 5, 'relearn_reps': 3,
        'forest': {'n_trees': 100, 'min_leaf': 5},
    },
    'theorem_check': {
        'reps': 1, 'n_exact': 6, 'n_mc': 500, 'mc_reps': 200, 'n_dep': 2000, 'rho': 0.9,
        'dep_reps': 20, 'n_mc_draws': 5000, 'grid_points': 21,
    },
}

FULL_SETTINGS: Dict[str, Dict] = {
    'fig1_ranks': {'reps': 50, 'n_reps': 10, 'forest': {'n_trees': 500}, 'mlp': {'max_iter': 3000}},
    'fig2_grid': {'ns': [100, 200, 500, 1000, 2000, 5000], 'reps': 20, 'n_reps': 10,
                  'forest': {'n_trees': 500}},
    'fig3_effects': {'reps': 50, 'forest': {'n_trees': 500}, 'mlp': {'max_iter': 3000}},
    'fig4_contour': {'reps': 100, 'n_reps': 10, 'resolution': [101, 101], 'forest': {'n_trees': 500}},
    'fig5_alternatives': {'n_reps': 10, 'relearn_reps': 10, 'forest': {'n_trees': 500},
                          'mlp': {'max_iter': 3000}},
    'fig6_nn_variance': {'reps': 100, 'resolution': [101, 101], 'mlp': {'max_iter': 3000}},
    'fig7_bikeshare': {'subsample': None, 'relearn_reps': 10, 'n_reps': 10, 'forest': {'n_trees': 500}},
    'theorem_check': {},
}

# 覆盖参数的别名：单值写法映射到列表键
ALIASES = {'rho': 'rhos', 'n': 'ns'}


def _merge(base: Dict, extra: Dict) -> Dict:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _as_list(value) -> List:
    return list(value) if isinstance(value, (list, tuple)) else [value]


@dataclass
class ExperimentConfig:
    """一次预设运行的配置：预设名 + 覆盖参数 + 主种子 + 输出目录 + 并行数"""

    preset: str
    overrides: Dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    out_dir: str = 'results'
    jobs: int = 1
    full: bool = False

    def __post_init__(self):
        if self.preset not in PRESET_IDS:
            raise ConfigError(f"未知的预设: {self.preset}，可选 {', '.join(PRESET_IDS)}")
        if int(self.seed) < 0:
            raise ConfigError(f"主种子必须非负: {self.seed}")
        if int(self.jobs) < 1:
            raise ConfigError(f"并行数必须 ≥ 1: {self.jobs}")
        self.seed = int(self.seed)
        self.jobs = int(self.jobs)
        self.settings()

    def settings(self) -> Dict:
        """合并默认值、完整规模值和覆盖参数，并校验"""
        settings = _merge(DESK_SETTINGS[self.preset], FULL_SETTINGS[self.preset] if self.full else {})
        overrides = dict(self.overrides)
        for single, plural in ALIASES.items():
            if single in overrides and plural in settings and single not in settings:
                overrides[plural] = _as_list(overrides.pop(single))
            if plural in overrides and single in settings and plural not in settings:
                values = _as_list(overrides.pop(plural))
                if len(values) != 1:
                    raise ConfigError(f"预设 {self.preset} 的 {single} 只接受单个值: {values}")
                overrides[single] = values[0]
        unknown = sorted(set(overrides) - set(settings))
        if unknown:
            raise ConfigError(f"预设 {self.preset} 不接受参数: {', '.join(unknown)}")
        settings = _merge(settings, overrides)
        # 列表型参数的单值写法（learners = linear）
        for key, default in DESK_SETTINGS[self.preset].items():
            if isinstance(default, list) and not isinstance(settings[key], (list, tuple)):
                settings[key] = [settings[key]]

        if int(settings['reps']) < 1:
            raise ConfigError(f"重复次数必须 ≥ 1: {settings['reps']}")
        settings['reps'] = int(settings['reps'])
        rhos = list(settings.get('rhos', [])) + ([settings['rho']] if 'rho' in settings else [])
        for rho in rhos:
            if not -1.0 <= float(rho) <= 1.0:
                raise ConfigError(f"相关参数必须在 [-1, 1] 内: {rho}")
        for key in ('measures',):
            for measure in settings.get(key, []):
                if measure not in MEASURES:
                    raise ConfigError(f"未知的重要性度量: {measure}")
        for kind in settings.get('learners', []):
            if kind not in ('linear', 'forest', 'mlp'):
                raise ConfigError(f"未知的学习器类型: {kind}")
        return settings

    def to_dict(self) -> Dict:
        return {'preset': self.preset, 'overrides': self.overrides, 'seed': self.seed,
                'out_dir': str(self.out_dir), 'jobs': self.jobs, 'full': self.full}


@dataclass
class ReplicateResult:
    replicate: int
    seed: int
    payload: Dict[str, Any]
    elapsed: float


def _seed(master: int, replicate: int, role: str) -> int:
    return derive_seed(master, replicate, role).seed


def _learner(kind: str, settings: Dict, seed: int) -> Learner:
    if kind == 'linear':
        return Learner('linear')
    config = dict(settings.get(kind, {}))
    config['seed'] = seed
    return Learner(kind, config)


def _base_data(settings: Dict, master: int, replicate: int, rho: float, n: int, role: str = 'data'):
    beta = tuple(settings.get('beta', BASE_BETA))
    copula = CopulaSpec(p=len(beta), pair=(0, 1), rho=float(rho))
    response = ResponseSpec(beta=beta, sigma=float(settings.get('sigma', BASE_SIGMA)))
    tag = f'{role}_{float(rho)!r}_{int(n)}'
    d = simulate_dataset(copula, response, int(n), derive_seed(master, replicate, f'{tag}_features'),
                         derive_seed(master, replicate, f'{tag}_noise'))
    return d, copula


def _extrapolation_data(settings: Dict, master: int, replicate: int = 0, rho: Optional[float] = None,
                        role: str = 'extrapolation') -> Dataset:
    rho = float(settings['rho'] if rho is None else rho)
    return extrapolation_design(int(settings['n']), rho, float(settings['sigma']),
                                feature_rng=derive_seed(master, replicate, f'{role}_{rho!r}_features'),
                                noise_rng=derive_seed(master, replicate, f'{role}_{rho!r}_noise'))


# ---------------------------------------------------------------- 重复任务

def _ranks_job(settings: Dict, master: int, replicate: int, measures_for: Callable) -> Dict:
    reports = []
    for rho in settings['rhos']:
        d, copula = _base_data(settings, master, replicate, rho, settings['n'])
        sampler = CopulaConditional(copula)
        for kind in settings['learners']:
            learner = _learner(kind, settings, _seed(master, replicate, f'fit_{kind}_{rho!r}'))
            model = learner.fit(d)
            vi_seed = _seed(master, replicate, f'vi_{kind}_{rho!r}')
            for measure in measures_for(kind):
                n_reps = settings.get('relearn_reps', settings['n_reps']) \
                    if measure in RELEARN_MEASURES else settings['n_reps']
                report = importance_report(measure, d, model=model, learner=learner, sampler=sampler,
                                           n_reps=int(n_reps), seed=vi_seed)
                reports.append(((float(rho), kind, measure), report))
    return {'reports': reports}


def _fig1_job(settings: Dict, master: int, replicate: int) -> Dict:
    return _ranks_job(settings, master, replicate,
                      lambda kind: (PAP, OOB) if kind == 'forest' else (PAP,))


def _fig5_job(settings: Dict, master: int, replicate: int) -> Dict:
    return _ranks_job(settings, master, replicate, lambda kind: tuple(settings['measures']))


def _fig2_job(settings: Dict, master: int, replicate: int) -> Dict:
    records = []
    for rho in settings['rhos']:
        for n in settings['ns']:
            d, _ = _base_data(settings, master, replicate, rho, n)
            config = dict(settings['forest'], seed=_seed(master, replicate, f'forest_{rho!r}_{n}'))
            model = fit_forest(d, config)
            vi_seed = _seed(master, replicate, f'vi_{rho!r}_{n}')
            for measure in settings['measures']:
                report = importance_report(measure, d, model=model, n_reps=int(settings['n_reps']),
                                           seed=vi_seed)
                records.append({'measure': measure, 'n': int(n), 'rho': float(rho),
                                'rank_x1': int(report.ranks[0]), 'rank_x2': int(report.ranks[1])})
    return {'records': records}


def reference_rows(settings: Dict, master: int, copula: CopulaSpec) -> Dataset:
    """ICE 参考行：x1 = x2 = 0, 0.1, …, 1，其余特征为固定种子下的均匀抽样"""
    count = int(settings['ice_rows'])
    gen = derive_seed(master, 0, 'ice_rows').generator()
    X = gen.uniform(0.0, 1.0, size=(count, copula.p))
    levels = np.linspace(0.0, 1.0, count)
    X[:, copula.pair[0]] = levels
    X[:, copula.pair[1]] = levels
    y = gen_response(X, ResponseSpec(beta=tuple(settings.get('beta', BASE_BETA))),
                     derive_seed(master, 0, 'ice_rows_noise'))
    return Dataset(X, y, tuple(f"x{j + 1}" for j in range(copula.p)))


def _fig3_job(settings: Dict, master: int, replicate: int) -> Dict:
    d, copula = _base_data(settings, master, 0, settings['rho'], settings['n'], role='shared')
    grid = default_grid(int(settings['grid_points']))
    j = int(settings['feature'])
    rows = reference_rows(settings, master, copula) if replicate == 0 else None
    pd_curves, ice = {}, {}
    for kind in settings['learners']:
        model = _learner(kind, settings, _seed(master, replicate, f'fit_{kind}')).fit(d)
        pd_curves[kind] = partial_dependence(model, d, j, grid)
        if rows is not None:
            ice[kind] = ice_curves(model, rows, None, j, grid, support=CopulaConditional(copula))
    return {'pd': pd_curves, 'ice': ice, 'reference_rows': rows}


def _fig4_job(settings: Dict, master: int, replicate: int) -> Dict:
    d = _extrapolation_data(settings, master)
    config = dict(settings['forest'], seed=_seed(master, replicate, 'fig4_forest'))
    payload = {'model': fit_forest(d, config), 'pap': {}}
    if replicate < int(settings['pap_reps']):
        for rho in (0.0, float(settings['rho'])):
            fresh = _extrapolation_data(settings, master, replicate, rho, role='pap_data')
            forest = fit_forest(fresh, dict(settings['forest'],
                                            seed=_seed(master, replicate, f'pap_forest_{rho!r}')))
            payload['pap'][rho] = vi_pap(forest, fresh, 1, int(settings['n_reps']),
                                         derive_seed(master, replicate, f'pap_{rho!r}'))
    return payload


def _fig6_job(settings: Dict, master: int, replicate: int) -> Dict:
    d = _extrapolation_data(settings, master)
    learner = _learner('mlp', settings, _seed(master, replicate, 'fig6_mlp'))
    return {'model': learner.fit(d)}


def _fig7_job(settings: Dict, master: int, replicate: int) -> Dict:
    subsample = settings.get('subsample')
    subsample = None if subsample is None else int(subsample)
    if settings.get('path'):
        cfg = BikeShareConfig(path=settings['path'], subsample=subsample, seed=master)
    else:
        cfg = BikeShareConfig.from_env(subsample, master)
    d = load_bikeshare(cfg)
    table = rank_comparison(d, settings['forest'], int(settings['relearn_reps']),
                            seed=_seed(master, replicate, 'fig7'), n_reps=int(settings['n_reps']))
    return {'table': table, 'data': d}


# ---------------------------------------------------------------- 理论校验

def _check(records: List[Dict], check: str, feature: str, observed: float, expected: float,
           tolerance: float, relative: bool, target: str = ''):
    error = abs(observed - expected)
    rel_error = error / abs(expected) if expected != 0 else float('inf') if error > 0 else 0.0
    passed = (rel_error if relative else error) <= tolerance
    records.append({'check': check, 'feature': feature, 'observed': observed, 'expected': expected,
                    'abs_error': error, 'rel_error': rel_error,
                    'tolerance': f"{'rel' if relative else 'abs'} {tolerance:g}", 'passed': bool(passed),
                    'target': target})


def theorem_checks(settings: Dict, master: int) -> Dict:
    """
    线性模型理论结果的可执行校验

    Returns:
        Dict: checks（逐项通过 / 失败表）, oracle（理论目标值长表）, passed
    """
    records: List[Dict] = []

    # 全排列枚举 vs 闭式
    small = {'beta': (1.0, 0.5, 2.0), 'sigma': 0.1}
    d, _ = _base_data(small, master, 0, 0.0, settings['n_exact'], role='exact')
    lin = LinearOracle.from_model(fit_linear(d), d)
    closed = theorem1_vi(lin)
    for j in range(d.n_features):
        _check(records, 'permutation_exact', d.names[j], brute_force_vi(fit_linear(d), d, j),
               closed[j], 1e-9, relative=False)

    # 蒙特卡洛置换 vs 闭式
    d, _ = _base_data(settings, master, 0, 0.0, settings['n_mc'], role='mc')
    model = fit_linear(d)
    lin = LinearOracle.from_model(model, d)
    closed = theorem1_vi(lin)
    for j, beta in enumerate(BASE_BETA):
        if beta != 0:
            score = vi_pap(model, d, j, int(settings['mc_reps']), derive_seed(master, j, 'mc_pap'))
            _check(records, 'permutation_monte_carlo', d.names[j], score, closed[j], 0.05, relative=True)

    # PD / ICE 直线
    grid = default_grid(int(settings['grid_points']))
    for j in range(d.n_features):
        intercept, slope = theorem1_pd_line(lin, j)
        pd_curve = partial_dependence(model, d, j, grid)
        deviation = float(np.max(np.abs(pd_curve.values - (intercept + slope * grid))))
        _check(records, 'pd_line', d.names[j], deviation, 0.0, 1e-9, relative=False)
        ice = ice_curves(model, d, range(20), j, grid)
        lines = []
        for i in range(20):
            c, b = theorem1_ice_line(lin, d.features[i], j)
            lines.append(c + b * grid)
        deviation = float(np.max(np.abs(ice.values - lines)))
        _check(records, 'ice_line', d.names[j], deviation, 0.0, 1e-9, relative=False)

    residuals = normal_equation_residuals(model, d)
    for j in range(d.n_features):
        _check(records, 'normal_equations', d.names[j], float(residuals[j]), 0.0,
               1e-6 * d.n_rows, relative=False)

    # 特征相关时的 drop / 重学 / 条件重要性
    d, copula = _base_data(settings, master, 0, settings['rho'], settings['n_dep'], role='dependence')
    model = fit_linear(d)
    learner = Learner('linear')
    sampler = CopulaConditional(copula)
    dep = dependence_oracle(d, copula, int(settings['n_mc_draws']), derive_seed(master, 0, 'conditional_variance'))
    targets = theorem2_targets(dep, model.beta)
    reps = int(settings['dep_reps'])
    for j, beta in enumerate(BASE_BETA):
        if beta == 0:
            continue
        name = d.names[j]
        _check(records, 'drop', name, vi_drop(learner, d, j, baseline_model=model),
               targets['drop'][j], 0.02, relative=True, target='drop (β²D)')
        _check(records, 'permute_relearn_vs_drop', name,
               vi_permute_relearn(learner, d, j, reps, derive_seed(master, j, 'perm_relearn'), model),
               targets['relearn_as_drop'][j], 0.10, relative=True, target='relearn_as_drop (β²D)')
        _check(records, 'condition_relearn_vs_drop', name,
               vi_condition_relearn(learner, d, j, sampler, reps, derive_seed(master, j, 'cond_relearn'), model),
               targets['relearn_as_drop'][j], 0.10, relative=True, target='relearn_as_drop (β²D)')
        _check(records, 'conditional', name,
               vi_conditional(model, d, j, sampler, reps, derive_seed(master, j, 'conditional')),
               targets['conditional'][j], 0.10, relative=True, target='conditional (2β²V)')

    lin = LinearOracle.from_model(model, d)
    X = np.asarray(d.features)
    centered = X[:, :2] - lin.column_means[:2]
    expansion = (lin.beta[0] ** 2 * lin.centered_ss[0] + lin.beta[1] ** 2 * lin.centered_ss[1]
                 + 2 * lin.beta[0] * lin.beta[1] * float(centered[:, 0] @ centered[:, 1]))
    _check(records, 'joint_pair', 'x1+x2', joint_pair_importance(lin, d, 0, 1), expansion, 1e-9, relative=True)

    checks = pd.DataFrame.from_records(records)
    oracle = oracle_frame(d.names, lin, targets)
    passed = bool(checks['passed'].all())
    return {'checks': checks, 'oracle': oracle, 'passed': passed}


def _theorem_job(settings: Dict, master: int, replicate: int) -> Dict:
    return theorem_checks(settings, master)


# ---------------------------------------------------------------- 汇总与写出

def _report_frame(results: List[ReplicateResult]) -> pd.DataFrame:
    frames = []
    for result in results:
        for (rho, kind, _), report in result.payload['reports']:
            frame = report.to_frame()
            frame.insert(0, 'learner', kind)
            frame.insert(0, 'rho', rho)
            frame.insert(0, 'replicate', result.replicate)
            frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def _aggregate_ranks(settings: Dict, results: List[ReplicateResult]) -> Dict:
    grouped: Dict = {}
    for result in results:
        for key, report in result.payload['reports']:
            grouped.setdefault(key, []).append(report)
    tables = {key: aggregate_ranks(reports, label=f'rho={key[0]:g} {key[1]}')
              for key, reports in grouped.items()}
    summary = {f'{rho:g}/{kind}/{measure}': dict(zip(t.names, np.round(t.mean_ranks, 3).tolist()))
               for (rho, kind, measure), t in tables.items()}
    master = results[0].seed
    datasets = {f'data_rho{float(rho):g}': _base_data(settings, master, 0, rho, settings['n'])[0]
                for rho in settings['rhos']}
    return {'tables': tables, 'scores': _report_frame(results), 'datasets': datasets, 'summary': summary}


def _write_ranks(prefix: str, artifacts: Dict, manager: RunManager, settings: Dict):
    _write_frame(manager, artifacts['scores'], f'{prefix}_scores.csv', 'replicate_scores')
    frames = []
    for (rho, kind, measure), table in artifacts['tables'].items():
        frame = table.to_frame()
        frame.insert(0, 'learner', kind)
        frame.insert(0, 'rho', rho)
        frames.append(frame)
        _write_svg(manager, svg_render.render_svg(table, {'title': f'{measure} {kind} rho={rho:g}'}),
                   f'{prefix}_{kind}_{measure}_rho{rho:g}.svg', 'rank_plot')
    _write_frame(manager, pd.concat(frames, ignore_index=True), f'{prefix}_mean_ranks.csv', 'mean_ranks')


def _aggregate_fig2(settings: Dict, results: List[ReplicateResult]) -> Dict:
    records = [dict(r, replicate=res.replicate) for res in results for r in res.payload['records']]
    frame = pd.DataFrame.from_records(records)
    means = (frame.groupby(['measure', 'n', 'rho'], sort=True)
             .agg(mean_rank_x1=('rank_x1', 'mean'), mean_rank_x2=('rank_x2', 'mean'),
                  n_replicates=('replicate', 'count'))
             .reset_index())
    return {'replicates': frame, 'grid': means,
            'summary': {f'{m}/n={n}/rho={r:g}': v for m, n, r, v in
                        means[['measure', 'n', 'rho', 'mean_rank_x1']].itertuples(index=False)}}


def _write_fig2(artifacts: Dict, manager: RunManager, settings: Dict):
    _write_frame(manager, artifacts['replicates'], 'fig2_replicate_ranks.csv', 'replicate_ranks')
    grid = artifacts['grid']
    _write_frame(manager, grid, 'fig2_rank_grid.csv', 'mean_ranks')
    for measure, block in grid.groupby('measure', sort=True):
        rhos = sorted(block['rho'].unique())
        series = {f'n={n}': part.sort_values('rho')['mean_rank_x1'].tolist()
                  for n, part in block.groupby('n', sort=True)}
        _write_svg(manager, svg_render.render_series(rhos, series, 'rho', 'mean rank of x1',
                                                     {'title': measure}),
                   f'fig2_{measure}.svg', 'rank_plot')


def _aggregate_fig3(settings: Dict, results: List[ReplicateResult]) -> Dict:
    ensembles = {}
    for kind in settings['learners']:
        grid, mean, sd = curve_ensemble([r.payload['pd'][kind] for r in results])
        ensembles[kind] = pd.DataFrame({'grid_value': grid, 'mean': mean, 'sd': sd})
    first = results[0].payload
    d, _ = _base_data(settings, results[0].seed, 0, settings['rho'], settings['n'], role='shared')
    return {'ensembles': ensembles, 'ice': first['ice'], 'reference_rows': first['reference_rows'],
            'datasets': {'data': d},
            'summary': {kind: float(frame['sd'].max()) for kind, frame in ensembles.items()}}


def _write_fig3(artifacts: Dict, manager: RunManager, settings: Dict):
    j = int(settings['feature'])
    rows = artifacts['reference_rows']
    _write_frame(manager, rows.to_frame(), 'fig3_reference_rows.csv', 'reference_rows')
    for kind, frame in artifacts['ensembles'].items():
        _write_frame(manager, frame, f'fig3_pd_{kind}.csv', 'pd_ensemble')
        curve = EffectCurve(kind='pd', feature=j, grid=frame['grid_value'].to_numpy(),
                            values=frame['mean'].to_numpy(), name=rows.names[j])
        _write_svg(manager, svg_render.render_svg(curve, {'title': f'PD {kind}'}),
                   f'fig3_pd_{kind}.svg', 'pd_plot')
    for kind, curve in artifacts['ice'].items():
        _write_frame(manager, curve.to_frame(), f'fig3_ice_{kind}.csv', 'ice_curves')
        _write_svg(manager, svg_render.render_svg(curve, {'title': f'ICE {kind}'}),
                   f'fig3_ice_{kind}.svg', 'ice_plot')


def _aggregate_fig4(settings: Dict, results: List[ReplicateResult]) -> Dict:
    master = results[0].seed
    d = _extrapolation_data(settings, master)
    models = [r.payload['model'] for r in results]
    field_ = prediction_grid(models, resolution=tuple(settings['resolution']),
                             training_points=np.asarray(d.features))
    g1, _ = field_.coordinates()
    off, near = region_contrast(field_, np.abs(field_.mean - g1))

    records = []
    for q, query in enumerate(settings['queries']):
        members = np.concatenate(leaf_comembers(models[0], np.asarray(query, dtype=np.float64)))
        rows, counts = np.unique(members, return_counts=True)
        for row, count in zip(rows, counts):
            records.append({'query': q, 'query_x1': query[0], 'query_x2': query[1], 'row': int(row),
                            'x1': d.features[row, 0], 'x2': d.features[row, 1], 'multiplicity': int(count)})
    comembers = pd.DataFrame.from_records(records)
    queries = permutation_queries(d, 0, derive_seed(master, 0, 'fig4_queries'))
    pap = pd.DataFrame.from_records([{'replicate': r.replicate, 'rho': rho, 'score': score}
                                     for r in results for rho, score in sorted(r.payload['pap'].items())])
    pap_means = pap.groupby('rho', sort=True)['score'].mean()
    summary = {'off_diagonal_mae': off, 'diagonal_mae': near,
               **{f'pap_x2_rho{rho:g}': float(v) for rho, v in pap_means.items()}}
    return {'field': field_, 'data': d, 'comembers': comembers, 'queries': queries, 'pap': pap,
            'datasets': {'data': d}, 'summary': summary}


def _write_fig4(artifacts: Dict, manager: RunManager, settings: Dict):
    field_ = artifacts['field']
    d = artifacts['data']
    _write_frame(manager, field_.to_frame(), 'fig4_field.csv', 'mean_field')
    _write_svg(manager, svg_render.render_svg(field_, {'title': 'forest mean'}), 'fig4_field.svg', 'contour_plot')
    comembers = artifacts['comembers']
    _write_frame(manager, comembers, 'fig4_comembers.csv', 'leaf_comembers')
    first = comembers[comembers['query'] == 0]
    _write_svg(manager, svg_render.render_scatter(d.features[:, 0], d.features[:, 1], 'x1', 'x2',
                                                  {'title': 'leaf co-members'},
                                                  highlight=first[['x1', 'x2']].to_numpy()),
               'fig4_comembers.svg', 'comember_plot')
    queries = pd.DataFrame(artifacts['queries'][:, :2], columns=['x1', 'x2'])
    _write_frame(manager, queries, 'fig4_permutation_queries.csv', 'permutation_queries')
    _write_svg(manager, svg_render.render_scatter(queries['x1'], queries['x2'], 'x1', 'x2',
                                                  {'title': 'permuted x1'}),
               'fig4_permutation_queries.svg', 'query_plot')
    _write_frame(manager, artifacts['pap'], 'fig4_pap_x2.csv', 'pap_scores')
    _write_frame(manager, _summary_frame(artifacts['summary']), 'fig4_summary.csv', 'summary')


def _aggregate_fig6(settings: Dict, results: List[ReplicateResult]) -> Dict:
    d = _extrapolation_data(settings, results[0].seed)
    field_ = prediction_grid([r.payload['model'] for r in results], resolution=tuple(settings['resolution']),
                             training_points=np.asarray(d.features))
    off, near = region_contrast(field_, field_.sd)
    not_converged = sum(1 for r in results if not r.payload['model'].converged)
    return {'field': field_, 'datasets': {'data': d},
            'summary': {'off_diagonal_sd': off, 'diagonal_sd': near, 'not_converged': not_converged}}


def _write_fig6(artifacts: Dict, manager: RunManager, settings: Dict):
    field_ = artifacts['field']
    _write_frame(manager, field_.to_frame(), 'fig6_field.csv', 'mean_sd_field')
    _write_svg(manager, svg_render.render_svg(field_, {'title': 'MLP mean'}), 'fig6_mean.svg', 'contour_plot')
    _write_svg(manager, svg_render.render_svg(field_, {'title': 'MLP sd', 'field': 'sd'}),
               'fig6_sd.svg', 'variance_plot')
    _write_frame(manager, _summary_frame(artifacts['summary']), 'fig6_summary.csv', 'summary')


def _aggregate_fig7(settings: Dict, results: List[ReplicateResult]) -> Dict:
    payload = results[0].payload
    table, d = payload['table'], payload['data']
    summary = {'n_rows': d.n_rows, 'n_features': d.n_features}
    summary.update({f'{f}': (int(o), int(r)) for f, o, r in table.itertuples(index=False)})
    return {'table': table, 'datasets': {'data': d}, 'summary': summary}


def _write_fig7(artifacts: Dict, manager: RunManager, settings: Dict):
    table = artifacts['table']
    _write_frame(manager, table, 'fig7_ranks.csv', 'paired_ranks')
    _write_svg(manager, svg_render.render_rank_pairs(table['feature'].tolist(), table['oob_rank'],
                                                     table['relearn_rank'], 'OOB rank', 'relearn rank'),
               'fig7_ranks.svg', 'rank_plot')


def _aggregate_theorem(settings: Dict, results: List[ReplicateResult]) -> Dict:
    payload = dict(results[0].payload)
    checks = payload['checks']
    payload['summary'] = {'checks': int(len(checks)), 'failed': int((~checks['passed']).sum())}
    return payload


def _write_theorem(artifacts: Dict, manager: RunManager, settings: Dict):
    _write_frame(manager, artifacts['checks'], 'theorem_check.csv', 'checks')
    _write_frame(manager, artifacts['oracle'], 'theorem_oracle.csv', 'oracle_targets')


def _summary_frame(summary: Dict) -> pd.DataFrame:
    return pd.DataFrame({'metric': list(summary.keys()), 'value': list(summary.values())})


def _write_frame(manager: RunManager, frame: pd.DataFrame, name: str, role: str):
    path = manager.path(name)
    frame.to_csv(path, index=False, encoding='utf-8', float_format=FLOAT_FORMAT, lineterminator='\n')
    manager.register(path, role)


def _write_svg(manager: RunManager, document: str, name: str, role: str):
    path = manager.path(name)
    svg_render.write_svg(document, path)
    manager.register(path, role)


def _write_datasets(prefix: str, datasets: Dict[str, Dataset], manager: RunManager):
    """生成或读入的数据集按数据集 CSV 格式写出"""
    for suffix, d in datasets.items():
        manager.register(d.to_csv(manager.path(f'{prefix}_{suffix}.csv')), 'dataset')


@dataclass(frozen=True)
class Preset:
    job: Callable
    aggregate: Callable
    write: Callable


PRESETS: Dict[str, Preset] = {
    'fig1_ranks': Preset(_fig1_job, _aggregate_ranks, lambda a, m, s: _write_ranks('fig1', a, m, s)),
    'fig2_grid': Preset(_fig2_job, _aggregate_fig2, _write_fig2),
    'fig3_effects': Preset(_fig3_job, _aggregate_fig3, _write_fig3),
    'fig4_contour': Preset(_fig4_job, _aggregate_fig4, _write_fig4),
    'fig5_alternatives': Preset(_fig5_job, _aggregate_ranks, lambda a, m, s: _write_ranks('fig5', a, m, s)),
    'fig6_nn_variance': Preset(_fig6_job, _aggregate_fig6, _write_fig6),
    'fig7_bikeshare': Preset(_fig7_job, _aggregate_fig7, _write_fig7),
    'theorem_check': Preset(_theorem_job, _aggregate_theorem, _write_theorem),
}


def run_replicate(task) -> ReplicateResult:
    """进程池入口：执行一个重复，错误附带预设和重复编号"""
    preset, settings, master, replicate = task
    started = time.perf_counter()
    try:
        payload = PRESETS[preset].job(settings, master, replicate)
    except DiagnosticsError as e:
        raise type(e)(f"[{preset} 重复 {replicate}] {e}") from e
    except Exception as e:
        raise DiagnosticsError(f"[{preset} 重复 {replicate}] {type(e).__name__}: {e}") from e
    return ReplicateResult(replicate=replicate, seed=master, payload=payload,
                           elapsed=time.perf_counter() - started)


class PresetRunner:
    """预设运行器 - 调度重复任务、汇总、写出 CSV / SVG 和运行清单"""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.settings = config.settings()
        self.preset = PRESETS[config.preset]

    def replicate_results(self) -> List[ReplicateResult]:
        reps = self.settings['reps']
        tasks = [(self.config.preset, self.settings, self.config.seed, r) for r in range(reps)]
        workers = min(self.config.jobs, reps)
        if workers > 1:
            logger.info(f"⚙️ 并行执行 {reps} 个重复 (进程数 {workers})")
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run_replicate, tasks))
        else:
            results = [run_replicate(task) for task in tasks]
        return sorted(results, key=lambda r: r.replicate)

    def compute(self):
        """
        只计算不写文件

        Returns:
            Tuple[Dict, List[ReplicateResult]]: (汇总结果, 各重复结果)
        """
        results = self.replicate_results()
        return self.preset.aggregate(self.settings, results), results

    def run(self) -> Dict:
        """
        执行预设并写出全部输出

        Returns:
            Dict: {'success', 'outputs', 'error', 'elapsed', 'summary', 'manifest'}
        """
        started = time.perf_counter()
        manager = RunManager(self.config.out_dir, self.config.preset)
        if not manager.acquire_lock():
            raise ConfigError(f"输出目录被另一个运行占用: {manager.out_dir}")
        try:
            logger.info("=" * 60)
            logger.info(f"🚀 开始预设 {self.config.preset} (种子 {self.config.seed}, "
                        f"重复 {self.settings['reps']}, {'完整' if self.config.full else '桌面'}规模)")
            artifacts, results = self.compute()
            for result in results:
                manager.record_replicate(result.replicate, result.seed, result.elapsed)
            self.preset.write(artifacts, manager, self.settings)
            _write_datasets(self.config.preset.split('_')[0], artifacts.get('datasets', {}), manager)
            elapsed = time.perf_counter() - started
            passed = artifacts.get('passed', True)
            manifest = manager.write_manifest(
                {'experiment': self.config.to_dict(), 'settings': self.settings},
                self.config.seed, elapsed, extra={'summary': artifacts.get('summary', {})})
            stats = manager.get_stats()
            logger.info(f"⏱️ 预设 {self.config.preset} 完成，耗时 {elapsed:.1f} 秒，"
                        f"{stats['outputs']} 个输出文件，峰值内存 {stats['peak_rss_bytes'] / 2 ** 20:.0f} MB")
            logger.info("=" * 60)
            return {
                'success': passed,
                'outputs': [o['name'] for o in manager.outputs],
                'error': None if passed else '理论校验未全部通过',
                'elapsed': elapsed,
                'summary': artifacts.get('summary', {}),
                'manifest': str(manifest),
            }
        finally:
            manager.release_lock()


def run(config: ExperimentConfig) -> Dict:
    return PresetRunner(config).run()
