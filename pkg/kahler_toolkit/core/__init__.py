"""核心模块: 日志与异常体系"""

from .errors import (
    ChartDomainError,
    ConfigError,
    DegenerateMetricError,
    DSLDomainError,
    DSLNameError,
    DSLSyntaxError,
    FrameError,
    GeometryInputError,
    KahlerToolkitError,
    NumericalError,
    QuadratureError,
    ShootingError,
    StepUnderflowError,
)
from .logger import LogContext, get_logger, log_audit, setup_logging

__all__ = [
    "setup_logging",
    "get_logger",
    "log_audit",
    "LogContext",
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
