"""
异常体系

所有可预期的失败都继承自 KahlerToolkitError, 并携带CLI退出码:
配置类错误退出码 2, 数值类错误退出码 3。实验判定为 FAIL 不是异常, 由CLI映射为退出码 1。
"""

from typing import Any, Iterable, Optional


EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class KahlerToolkitError(Exception):
    """工具包异常基类"""

    exit_code: int = EXIT_NUMERIC

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": self.message, **{
            k: v for k, v in self.details.items() if isinstance(v, (str, int, float, bool))
        }}


# ---------------------------------------------------------------- 配置类 (退出码 2)

class ConfigError(KahlerToolkitError):
    """配置无效: 未知键、非法取值、目录项不存在、流形文件错误"""

    exit_code = EXIT_CONFIG


class DSLSyntaxError(ConfigError):
    """表达式语法错误, 携带字节偏移与期望的记号集合"""

    def __init__(self, message: str, text: str, offset: int, expected: Iterable[str]):
        self.text = text
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        super().__init__(
            f"{message} (位置 {offset}, 期望: {', '.join(self.expected) or '-'})",
            offset=offset,
        )


class DSLNameError(ConfigError):
    """未知函数名或变量下标越界"""


class GeometryInputError(ConfigError):
    """几何输入不满足前置条件: 零向量、非单位向量、流形类型不符等"""


# ---------------------------------------------------------------- 数值类 (退出码 3)

class NumericalError(KahlerToolkitError):
    """数值计算失败"""

    exit_code = EXIT_NUMERIC


class DSLDomainError(NumericalError):
    """表达式求值越出定义域 (除零、非正数取对数、负数开方、非有限值)"""

    def __init__(self, message: str, subexpression: str = ""):
        self.subexpression = subexpression
        suffix = f" | 子表达式: {subexpression}" if subexpression else ""
        super().__init__(f"{message}{suffix}", subexpression=subexpression)


class DegenerateMetricError(NumericalError):
    """度量在该点非正定"""


class ChartDomainError(NumericalError):
    """路径离开坐标卡定义域, partial_path 为已积分部分"""

    def __init__(self, message: str, partial_path: Optional[Any] = None):
        self.partial_path = partial_path
        super().__init__(message)


class StepUnderflowError(NumericalError):
    """步长收缩低于下限"""


class ShootingError(NumericalError):
    """打靶法未收敛, best_residual 为最优端点误差"""

    def __init__(self, message: str, best_residual: float = float("nan")):
        self.best_residual = best_residual
        super().__init__(f"{message} | 最优残差: {best_residual:.3e}", best_residual=best_residual)


class FrameError(NumericalError):
    """标架补全失败"""


class QuadratureError(NumericalError):
    """数值积分不收敛"""


__all__ = [
    "EXIT_OK",
    "EXIT_FAIL",
    "EXIT_CONFIG",
    "EXIT_NUMERIC",
    "KahlerToolkitError",
    "ConfigError",
    "DSLSyntaxError",
    "DSLNameError",
    "GeometryInputError",
    "NumericalError",
    "DSLDomainError",
    "DegenerateMetricError",
    "ChartDomainError",
    "StepUnderflowError",
    "ShootingError",
    "FrameError",
    "QuadratureError",
]
