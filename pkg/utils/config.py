#!/usr/bin/env python3
"""
配置工具模块
加载 .env 到环境变量，解析 INI 格式的实验配置文件
"""
import configparser
import logging
import os
from pathlib import Path
from typing import Dict, List, Optional, Union

from core.errors import ConfigError
from core.presets import DEFAULT_SEED, ExperimentConfig

logger = logging.getLogger(__name__)

# 配置文件中这些键属于运行参数，不作为预设覆盖
RUN_KEYS = ('seed', 'out', 'jobs', 'full')
# 生成器配置节，由 simulate 命令读取，不是预设
GENERATOR_SECTION = 'generator'


def load_env_file(env_file: Union[str, Path]) -> Dict[str, str]:
    """
    加载 .env 文件到 os.environ（已存在的环境变量不覆盖）

    Returns:
        Dict[str, str]: 文件中读到的键值
    """
    env_file = Path(env_file)
    values: Dict[str, str] = {}
    if not env_file.exists():
        return values
    with open(env_file, 'r', encoding='utf-8') as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith('#') and '=' in line:
                key, value = line.split('=', 1)
                values[key.strip()] = value.strip()
    for key, value in values.items():
        os.environ.setdefault(key, value)
    return values


def env_int(key: str, default: int) -> int:
    raw = os.getenv(key)
    if raw is None or raw == '':
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"环境变量 {key} 必须是整数: {raw}") from e


def parse_value(raw: str):
    """把配置文本转换为 int / float / bool / None / 列表 / 字符串"""
    raw = raw.strip()
    if ',' in raw:
        return [parse_value(part) for part in raw.split(',') if part.strip()]
    lowered = raw.lower()
    if lowered in ('true', 'yes', 'on'):
        return True
    if lowered in ('false', 'no', 'off'):
        return False
    if lowered in ('none', 'null', ''):
        return None
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def parse_overrides(pairs: Dict[str, str]) -> Dict:
    """点号键展开为嵌套字典：forest.n_trees = 100 → {'forest': {'n_trees': 100}}"""
    overrides: Dict = {}
    for key, raw in pairs.items():
        target = overrides
        parts = key.split('.')
        for part in parts[:-1]:
            node = target.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"配置键冲突: {key}")
            target = node
        target[parts[-1]] = parse_value(raw)
    return overrides


def _read_ini(path: Union[str, Path]) -> configparser.ConfigParser:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"配置文件不存在: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path, encoding='utf-8')
    except configparser.Error as e:
        raise ConfigError(f"配置文件格式错误: {e}") from e
    return parser


def load_experiment_file(path: Union[str, Path], preset: Optional[str] = None) -> List[ExperimentConfig]:
    """
    读取实验配置文件

    Args:
        path: INI 文件，每个 [预设名] 一节
        preset: 只读取这一节（默认全部）

    Returns:
        List[ExperimentConfig]: 按文件中的顺序
    """
    path = Path(path)
    parser = _read_ini(path)

    sections = [s for s in parser.sections() if s != GENERATOR_SECTION]
    if preset is not None:
        if preset not in sections:
            raise ConfigError(f"配置文件中没有预设 [{preset}]")
        sections = [preset]
    if not sections:
        raise ConfigError(f"配置文件中没有任何预设: {path}")

    configs = []
    for section in sections:
        items = dict(parser.items(section))
        run_values = {k: parse_value(items.pop(k)) for k in RUN_KEYS if k in items}
        configs.append(ExperimentConfig(
            preset=section,
            overrides=parse_overrides(items),
            seed=run_values.get('seed', env_int('PAPDIAG_SEED', DEFAULT_SEED)),
            out_dir=str(run_values.get('out') or os.getenv('PAPDIAG_OUT', 'results')),
            jobs=run_values.get('jobs', env_int('PAPDIAG_JOBS', 1)),
            full=bool(run_values.get('full', False)),
        ))
    logger.info(f"✅ 已读取配置文件 {path}: {', '.join(c.preset for c in configs)}")
    return configs


def load_generator_section(path: Union[str, Path]) -> Dict:
    """读取配置文件的 [generator] 节：n, p, rho, pair, beta, beta0, sigma, seed"""
    parser = _read_ini(path)
    if not parser.has_section(GENERATOR_SECTION):
        raise ConfigError(f"配置文件中没有 [{GENERATOR_SECTION}] 节: {path}")
    return {key: parse_value(raw) for key, raw in parser.items(GENERATOR_SECTION)}
