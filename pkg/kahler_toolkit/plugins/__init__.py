"""
Kähler Toolkit 插件模块

提供插件基类、实验结果类型和插件注册机制。
"""

from .base import (
    ExperimentPlan,
    ExperimentResult,
    ParamSpec,
    Plugin,
    PluginCategory,
    ResidualReport,
    Verdict,
    get_plugin,
    get_registered_plugins,
    register_plugin,
)

__all__ = [
    "Plugin",
    "PluginCategory",
    "Verdict",
    "ExperimentPlan",
    "ExperimentResult",
    "ResidualReport",
    "ParamSpec",
    "register_plugin",
    "get_registered_plugins",
    "get_plugin",
]
