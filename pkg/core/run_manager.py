#!/usr/bin/env python3
"""
运行管理器模块
负责输出目录的进程锁、输出文件登记（内容哈希）和运行清单 manifest.json
"""
import hashlib
import json
import logging
import os
import platform
from datetime import datetime
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional, Union

import psutil

from .errors import ConfigError

logger = logging.getLogger(__name__)

LOCK_NAME = '.run.lock'
MANIFEST_NAME = 'manifest.json'
TRACKED_PACKAGES = ('numpy', 'scipy', 'pandas', 'psutil')


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def package_versions() -> Dict[str, str]:
    versions = {'python': platform.python_version()}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = 'unknown'
    return versions


class RunManager:
    """运行管理器 - 一次预设运行的输出目录、文件登记与清单"""

    def __init__(self, out_dir: Union[str, Path], preset: str):
        """
        初始化运行管理器

        Args:
            out_dir: 输出目录（不存在时创建）
            preset: 预设名称，写入清单
        """
        self.out_dir = Path(out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"输出目录不可写: {self.out_dir} ({e})") from e
        if not os.access(self.out_dir, os.W_OK):
            raise ConfigError(f"输出目录不可写: {self.out_dir}")
        self.preset = preset
        self.lock_file = self.out_dir / LOCK_NAME
        self.outputs: List[Dict] = []
        self.replicates: List[Dict] = []
        self.started_at = datetime.now().isoformat()
        self._process = psutil.Process()
        self._peak_rss = self._process.memory_info().rss
        logger.info(f"运行管理器初始化完成，输出目录: {self.out_dir}")

    def acquire_lock(self) -> bool:
        """获取输出目录锁；锁文件中的进程已退出时视为残留锁并清除"""
        try:
            if self.lock_file.exists():
                try:
                    old_pid = int(self.lock_file.read_text().strip())
                except ValueError:
                    old_pid = -1
                if old_pid > 0 and psutil.pid_exists(old_pid):
                    logger.error(f"❌ 另一个运行正在使用该输出目录 (PID: {old_pid})")
                    return False
                self.lock_file.unlink()
                logger.warning(f"⚠️ 清除残留锁文件 (PID: {old_pid})")

            self.lock_file.write_text(str(os.getpid()))
            logger.info(f"✅ 已获取输出目录锁 (PID: {os.getpid()})")
            return True
        except OSError as e:
            logger.error(f"❌ 获取输出目录锁失败: {e}")
            return False

    def release_lock(self):
        try:
            if self.lock_file.exists():
                self.lock_file.unlink()
                logger.info("✅ 已释放输出目录锁")
        except OSError as e:
            logger.error(f"❌ 释放输出目录锁失败: {e}")

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def register(self, path: Union[str, Path], role: str) -> Path:
        """登记一个已写出的输出文件"""
        path = Path(path)
        self.outputs.append({
            'name': path.relative_to(self.out_dir).as_posix(),
            'role': role,
            'sha256': file_sha256(path),
            'bytes': path.stat().st_size,
        })
        self._sample_memory()
        return path

    def record_replicate(self, replicate: int, seed: Union[int, Dict], elapsed: float, **extra):
        entry = {'replicate': replicate, 'seed': seed, 'elapsed': round(elapsed, 6)}
        entry.update(extra)
        self.replicates.append(entry)
        self._sample_memory()

    def _sample_memory(self):
        self._peak_rss = max(self._peak_rss, self._process.memory_info().rss)

    def write_manifest(self, config: Dict, master_seed: int, elapsed: float,
                       extra: Optional[Dict] = None) -> Path:
        """
        写出运行清单

        Returns:
            Path: manifest.json 路径（清单本身不登记在输出列表里）
        """
        self._sample_memory()
        manifest = {
            'preset': self.preset,
            'master_seed': master_seed,
            'config': config,
            'started_at': self.started_at,
            'elapsed': round(elapsed, 6),
            'versions': package_versions(),
            'peak_rss_bytes': int(self._peak_rss),
            'replicates': sorted(self.replicates, key=lambda r: r['replicate']),
            'outputs': sorted(self.outputs, key=lambda o: o['name']),
        }
        if extra:
            manifest.update(extra)
        path = self.path(MANIFEST_NAME)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(manifest, f, ensure_ascii=False, indent=2, sort_keys=True, default=str)
        logger.info(f"📦 已写出清单: {path} ({len(self.outputs)} 个输出文件)")
        return path

    def get_stats(self) -> Dict:
        return {
            'preset': self.preset,
            'out_dir': str(self.out_dir),
            'outputs': len(self.outputs),
            'replicates': len(self.replicates),
            'peak_rss_bytes': int(self._peak_rss),
        }
