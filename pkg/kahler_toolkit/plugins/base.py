"""
插件基类模块

定义实验插件的抽象接口、实验结果与判定, 以及插件注册表。
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Type

import numpy as np

from kahler_toolkit.core.errors import ConfigError
from kahler_toolkit.core.logger import get_logger

logger = get_logger(__name__)

RESIDUAL_QUANTILES = (0.5, 0.9, 0.99)


class PluginCategory(str, Enum):
    """插件分类枚举"""
    CURVATURE = "curvature"    # 逐点曲率查询
    VERIFY = "verify"          # 验证实验
    SIMULATE = "simulate"      # 随机模拟
    PLOTDATA = "plotdata"      # 绘图序列导出


class Verdict(str, Enum):
    """实验判定"""
    PASS = "PASS"
    FAIL = "FAIL"
    NOT_APPLICABLE = "NOT-APPLICABLE"
    SKIPPED = "SKIPPED"

    @classmethod
    def from_flag(cls, passed: bool) -> "Verdict":
        return cls.PASS if passed else cls.FAIL

    @classmethod
    def overall(cls, verdicts: Iterable["Verdict"]) -> "Verdict":
        """有 FAIL 即 FAIL; 否则有 PASS 即 PASS; 全部为 NOT-APPLICABLE/SKIPPED 时取第一个"""
        verdicts = list(verdicts)
        if not verdicts:
            return cls.SKIPPED
        if cls.FAIL in verdicts:
            return cls.FAIL
        if cls.PASS in verdicts:
            return cls.PASS
        return verdicts[0]


@dataclass
class ExperimentPlan:
    """
    实验计划

    Attributes:
        manifold: 目录项名称或流形文件
        experiment: 实验名称
        samples: 各类采样数量
        seeds: 使用的随机种子
        tolerances: 判定容差 (必须为正)
        output_dir: 报告输出目录
    """
    manifold: Optional[str]
    experiment: str
    samples: Dict[str, int] = field(default_factory=dict)
    seeds: Dict[str, int] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    output_dir: Optional[Path] = None

    def __post_init__(self):
        bad = {k: v for k, v in self.tolerances.items() if not v > 0}
        if bad:
            raise ConfigError(f"实验 {self.experiment} 的容差必须为正: {bad}")

    def to_dict(self) -> Dict[str, Any]:
        # 输出目录不参与内容哈希
        return {
            "manifold": self.manifold,
            "experiment": self.experiment,
            "samples": dict(self.samples),
            "seeds": dict(self.seeds),
            "tolerances": dict(self.tolerances),
        }


@dataclass
class ResidualReport:
    """
    逐样本残差

    rows 的每一行至少含 residual 列; passed ⇔ max |residual| < tolerance。
    vacuous 表示求和为空、检查只剩平凡内容。
    """
    rows: List[Dict[str, Any]]
    tolerance: float
    vacuous: bool = False

    @property
    def residuals(self) -> np.ndarray:
        return np.array([float(r["residual"]) for r in self.rows])

    @property
    def max_abs_residual(self) -> float:
        if not self.rows:
            return 0.0
        return float(np.max(np.abs(self.residuals)))

    @property
    def quantiles(self) -> Dict[str, float]:
        if not self.rows:
            return {}
        values = np.quantile(np.abs(self.residuals), RESIDUAL_QUANTILES)
        return {f"q{int(q * 100):02d}": float(v) for q, v in zip(RESIDUAL_QUANTILES, values)}

    @property
    def passed(self) -> bool:
        return self.max_abs_residual < self.tolerance

    def aggregates(self) -> Dict[str, Any]:
        return {
            "samples": len(self.rows),
            "max_abs_residual": self.max_abs_residual,
            "quantiles": self.quantiles,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "vacuous": self.vacuous,
        }


@dataclass
class ExperimentResult:
    """
    插件执行结果数据类

    Attributes:
        experiment: 实验名称 (同时作为报告文件名前缀)
        verdict: 判定
        plan: 实验计划
        measured: 实测的假设常数等
        aggregates: 汇总量
        notes: 说明 (NOT-APPLICABLE / SKIPPED 的原因写在这里)
        rows: 逐样本序列 (写入 CSV)
        fieldnames: CSV 列顺序
    """
    experiment: str
    verdict: Verdict
    plan: ExperimentPlan
    measured: Dict[str, Any] = field(default_factory=dict)
    aggregates: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    rows: List[Dict[str, Any]] = field(default_factory=list)
    fieldnames: Optional[List[str]] = None
    start_time: Optional[datetime] = None
    end_time: Optional[datetime] = None

    @property
    def duration(self) -> Optional[float]:
        """计算执行耗时(秒)"""
        if self.start_time and self.end_time:
            return (self.end_time - self.start_time).total_seconds()
        return None

    def to_report(self, config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """组装带配置回显与内容哈希的报告"""
        from kahler_toolkit.utils.export_utils import build_report

        return build_report(
            experiment=self.experiment,
            plan=self.plan.to_dict(),
            measured=self.measured,
            aggregates=self.aggregates,
            verdict=self.verdict.value,
            notes=self.notes,
            config=config,
        )


@dataclass
class ParamSpec:
    """
    参数规格说明

    用于定义插件读取的配置键
    """
    name: str
    param_type: Type
    description: str = ""
    required: bool = True
    default: Any = None
    choices: Optional[List[Any]] = None


class Plugin(ABC):
    """
    插件抽象基类

    所有实验插件必须继承此类并实现 get_required_params 与 run。
    """

    # 插件元数据 (子类必须定义)
    name: str = "BasePlugin"
    category: PluginCategory = PluginCategory.VERIFY
    description: str = "Base plugin class"
    version: str = "1.0.0"
    author: str = "Kähler Toolkit Team"

    dependencies: List[str] = ["numpy", "scipy"]

    def __init__(self):
        """初始化插件"""
        self._initialized = False
        self._missing_deps: List[str] = []

    def validate_dependencies(self) -> bool:
        """检查运行此插件所需的外部依赖是否满足"""
        ok, _ = self._check_imports(self.dependencies)
        return ok

    def _check_imports(self, imports: List[str]) -> Tuple[bool, List[str]]:
        """
        检查多个导入是否可用

        Returns:
            (是否全部可用, 缺失的导入列表)
        """
        missing = []
        for imp in imports:
            try:
                __import__(imp)
            except ImportError:
                missing.append(imp)

        self._missing_deps = missing
        return len(missing) == 0, missing

    @abstractmethod
    def get_required_params(self) -> List[ParamSpec]:
        """获取插件读取的配置键"""

    @abstractmethod
    def run(self, config) -> List[ExperimentResult]:
        """
        执行插件主逻辑

        Args:
            config: 已校验的 RunConfig

        Returns:
            每个实验一个 ExperimentResult
        """

    def initialize(self) -> bool:
        """在执行run()之前调用, 依赖缺失时返回 False"""
        if not self.validate_dependencies():
            logger.error(f"插件 {self.name} 缺少依赖: {', '.join(self._missing_deps)}")
            return False
        self._initialized = True
        return True

    def cleanup(self) -> None:
        self._initialized = False

    def __repr__(self) -> str:
        return f"<Plugin: {self.name} v{self.version}>"


# 插件注册表
_plugin_registry: Dict[str, Type[Plugin]] = {}


def register_plugin(plugin_class: Type[Plugin]) -> Type[Plugin]:
    """
    插件注册装饰器

    使用方法:
        @register_plugin
        class MyPlugin(Plugin):
            ...
    """
    _plugin_registry[plugin_class.name] = plugin_class
    return plugin_class


def get_registered_plugins() -> Dict[str, Type[Plugin]]:
    """获取所有已注册的插件"""
    return _plugin_registry.copy()


def get_plugin(name: str) -> Plugin:
    """
    按名称实例化插件

    Raises:
        ConfigError: 插件未注册
    """
    try:
        return _plugin_registry[name]()
    except KeyError:
        available = ", ".join(sorted(_plugin_registry))
        raise ConfigError(f"未知的插件: {name} (可用: {available})") from None


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
