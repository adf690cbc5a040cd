"""
随机数流、配置与 SVG 渲染工具
"""
from .seeding import RngLike, SeededStream, as_generator, derive_seed, spawn_seeds

__all__ = ['RngLike', 'SeededStream', 'as_generator', 'derive_seed', 'spawn_seeds']
