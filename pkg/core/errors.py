#!/usr/bin/env python3
"""
异常定义模块
所有诊断相关的错误都继承自 DiagnosticsError，命令行根据类型映射退出码
"""


class DiagnosticsError(Exception):
    """诊断工具包的基础异常"""

    exit_code = 3


class ConfigError(DiagnosticsError):
    """配置错误（预设、覆盖参数、配置文件）"""

    exit_code = 1


class DataError(DiagnosticsError, ValueError):
    """数据错误（维度不匹配、非有限值、文件缺失或格式不符）"""

    exit_code = 2


class SingularDesignError(DataError):
    """设计矩阵秩亏，最小二乘无唯一解"""


class UnsupportedConditionalError(DataError):
    """该特征没有可用的条件分布"""


class NotFittedError(DiagnosticsError):
    """模型尚未训练"""
