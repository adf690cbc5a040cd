"""
Core modules for permutation-importance diagnostics
"""
from .errors import (ConfigError, DataError, DiagnosticsError, NotFittedError, SingularDesignError,
                     UnsupportedConditionalError)
from .dataset import Dataset, LossVector, Permutation, permute_column, rank_scores, replace_column, set_column, squared_loss
from .synthgen import CopulaConditional, CopulaSpec, ResponseSpec, conditional_range, conditional_sample, simulate_dataset
from .linear_model import LinearModel, fit_linear
from .forest import ForestModel, fit_forest, leaf_comembers, oob_predictions
from .mlp import MLPModel, fit_mlp
from .learners import Learner, load_model, make_learner, save_model
from .importance import ImportanceReport, RankTable, aggregate_ranks, importance_report
from .effects import EffectCurve, GridField, ice_curves, partial_dependence, prediction_grid
from .oracle import DependenceOracle, LinearOracle, brute_force_vi, theorem1_vi, theorem2_targets
from .bikeshare import BikeShareConfig, load_bikeshare, rank_comparison
from .run_manager import RunManager
from .presets import PRESET_IDS, ExperimentConfig, PresetRunner

__all__ = [
    'ConfigError', 'DataError', 'DiagnosticsError', 'NotFittedError', 'SingularDesignError',
    'UnsupportedConditionalError',
    'Dataset', 'LossVector', 'Permutation', 'permute_column', 'rank_scores', 'replace_column',
    'set_column', 'squared_loss',
    'CopulaConditional', 'CopulaSpec', 'ResponseSpec', 'conditional_range', 'conditional_sample',
    'simulate_dataset',
    'LinearModel', 'fit_linear', 'ForestModel', 'fit_forest', 'leaf_comembers', 'oob_predictions',
    'MLPModel', 'fit_mlp', 'Learner', 'load_model', 'make_learner', 'save_model',
    'ImportanceReport', 'RankTable', 'aggregate_ranks', 'importance_report',
    'EffectCurve', 'GridField', 'ice_curves', 'partial_dependence', 'prediction_grid',
    'DependenceOracle', 'LinearOracle', 'brute_force_vi', 'theorem1_vi', 'theorem2_targets',
    'BikeShareConfig', 'load_bikeshare', 'rank_comparison',
    'RunManager', 'PRESET_IDS', 'ExperimentConfig', 'PresetRunner',
]
