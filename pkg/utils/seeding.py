#!/usr/bin/env python3
"""
随机数流工具模块
由主种子 + 重复编号 + 角色标签派生独立且可复现的随机数流
"""
import hashlib
from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class SeededStream:
    """可复现的随机数流：相同 (seed, stream_id) 产生完全相同的抽样"""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """创建新的 numpy Generator（每次调用都从流的起点开始）"""
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(sequence))


RngLike = Union[SeededStream, np.random.Generator, int, None]


def _role_key(role: str) -> int:
    digest = hashlib.sha256(role.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'big')


def derive_seed(master: int, replicate: int, role: str) -> SeededStream:
    """
    派生随机数流

    Args:
        master: 64 位主种子
        replicate: 重复编号
        role: 用途标签，如 'bootstrap'、'noise'

    Returns:
        SeededStream: 不同 (replicate, role) 对应不同的流
    """
    if master < 0:
        raise ValueError(f"主种子必须非负: {master}")
    sequence = np.random.SeedSequence(entropy=master, spawn_key=(replicate, _role_key(role)))
    # 把派生状态折叠回 (seed, stream_id)，便于写入清单
    state = sequence.generate_state(2, dtype=np.uint64)
    return SeededStream(seed=int(state[0]), stream_id=int(state[1]))


def as_generator(rng: RngLike) -> np.random.Generator:
    """将 SeededStream / Generator / 整数种子 / None 统一为 Generator"""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, SeededStream):
        return rng.generator()
    return np.random.default_rng(rng)


def spawn_seeds(rng: np.random.Generator, count: int) -> list:
    """从已有 Generator 抽取 count 个子种子（用于重新训练时的新种子）"""
    return [int(s) for s in rng.integers(0, 2 ** 63 - 1, size=count, dtype=np.int64)]
