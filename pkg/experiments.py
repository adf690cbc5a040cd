#!/usr/bin/env python3
"""
置换-预测诊断实验入口
每个预设一个子命令，另有 run --config 读取 INI 配置文件，simulate 写出合成数据；
退出码：0 成功，1 配置错误，2 数据错误，3 内部错误或理论校验失败
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

# 添加项目根目录到 Python 路径
sys.path.insert(0, str(Path(__file__).parent))

from core.errors import ConfigError, DiagnosticsError
from core.presets import DEFAULT_SEED, PRESET_IDS, ExperimentConfig, PresetRunner
from core.synthgen import generate_dataset
from utils.config import env_int, load_env_file, load_experiment_file, load_generator_section, parse_overrides

logger = logging.getLogger(__name__)

PROJECT_DIR = Path(__file__).parent
ENV_FILE = PROJECT_DIR / '.env'
LOG_FILE = 'experiments.log'


def setup_logging():
    level_name = os.getenv('PAPDIAG_LOG_LEVEL', 'INFO').upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(LOG_FILE, encoding='utf-8'),
            logging.StreamHandler()
        ]
    )
    # 设置控制台输出编码为 UTF-8
    if sys.platform == 'win32':
        sys.stdout.reconfigure(encoding='utf-8')
        sys.stderr.reconfigure(encoding='utf-8')


def _add_run_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--seed', type=int, default=None, help='主种子（默认 PAPDIAG_SEED 或 %d）' % DEFAULT_SEED)
    parser.add_argument('--reps', type=int, default=None, help='重复次数')
    parser.add_argument('--out', default=None, help='输出目录（默认 PAPDIAG_OUT 或 results）')
    parser.add_argument('--full', action='store_true', help='使用完整规模设置')
    parser.add_argument('--jobs', type=int, default=None, help='并行进程数（默认 PAPDIAG_JOBS 或 1）')
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='覆盖预设参数，可重复，如 --set forest.n_trees=200')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='experiments.py', description='置换-预测变量重要性诊断实验')
    commands = parser.add_subparsers(dest='command', required=True)
    for preset in PRESET_IDS:
        _add_run_flags(commands.add_parser(preset, help=f'运行预设 {preset}'))
    run = commands.add_parser('run', help='按配置文件运行')
    run.add_argument('--config', required=True, help='INI 配置文件')
    run.add_argument('--preset', default=None, help='只运行配置文件中的这一节')
    _add_run_flags(run)
    simulate = commands.add_parser('simulate', help='按生成器配置写出一份合成数据 CSV')
    simulate.add_argument('--out', required=True, help='输出 CSV 路径')
    simulate.add_argument('--config', default=None, help='读取 INI 文件的 [generator] 节')
    simulate.add_argument('--seed', type=int, default=None, help='生成器种子（默认配置文件或 PAPDIAG_SEED）')
    simulate.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                          help='覆盖生成器参数，如 --set rho=0.9 --set beta=1,0')
    return parser


def _parse_set(pairs: List[str]) -> Dict:
    raw = {}
    for pair in pairs:
        if '=' not in pair:
            raise ConfigError(f"覆盖参数格式应为 KEY=VALUE: {pair}")
        key, value = pair.split('=', 1)
        raw[key.strip()] = value
    return parse_overrides(raw)


def build_configs(args: argparse.Namespace) -> List[ExperimentConfig]:
    """命令行参数 > 配置文件 > .env > 内置默认值"""
    flag_overrides = _parse_set(args.overrides)
    if args.reps is not None:
        flag_overrides['reps'] = args.reps

    if args.command == 'run':
        configs = load_experiment_file(args.config, args.preset)
    else:
        configs = [ExperimentConfig(preset=args.command,
                                    seed=env_int('PAPDIAG_SEED', DEFAULT_SEED),
                                    out_dir=os.getenv('PAPDIAG_OUT', 'results'),
                                    jobs=env_int('PAPDIAG_JOBS', 1))]

    merged = []
    for config in configs:
        overrides = dict(config.overrides)
        for key, value in flag_overrides.items():
            if isinstance(value, dict) and isinstance(overrides.get(key), dict):
                overrides[key] = {**overrides[key], **value}
            else:
                overrides[key] = value
        merged.append(ExperimentConfig(
            preset=config.preset,
            overrides=overrides,
            seed=config.seed if args.seed is None else args.seed,
            out_dir=config.out_dir if args.out is None else args.out,
            jobs=config.jobs if args.jobs is None else args.jobs,
            full=config.full or args.full,
        ))
    return merged


def simulate(args: argparse.Namespace) -> Path:
    """命令行参数 > [generator] 节 > PAPDIAG_SEED > 生成器默认值"""
    config = {'seed': env_int('PAPDIAG_SEED', DEFAULT_SEED)}
    if args.config:
        config.update(load_generator_section(args.config))
    config.update(_parse_set(args.overrides))
    if args.seed is not None:
        config['seed'] = args.seed
    path = generate_dataset(config).to_csv(args.out)
    logger.info(f"💾 已写出合成数据: {path}")
    return path


def main(argv: Optional[List[str]] = None) -> int:
    load_env_file(ENV_FILE)
    setup_logging()
    args = build_parser().parse_args(argv)

    try:
        if args.command == 'simulate':
            simulate(args)
            return 0
        configs = build_configs(args)
        status = 0
        for config in configs:
            result = PresetRunner(config).run()
            if result['success']:
                logger.info(f"✅ {config.preset}: {len(result['outputs'])} 个输出文件 → {config.out_dir}")
                logger.info(f"📊 {config.preset} 摘要: {result['summary']}")
            else:
                logger.error(f"❌ {config.preset}: {result['error']}")
                status = 3
        return status
    except DiagnosticsError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"❌ 内部错误: {e}")
        return 3


if __name__ == '__main__':
    sys.exit(main())
