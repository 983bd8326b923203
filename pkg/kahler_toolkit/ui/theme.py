"""
UI主题配置模块

判定、残差与表格的统一配色, 以及全局 rich Console。
"""

from typing import Optional

from rich.box import DOUBLE, ROUNDED, SIMPLE_HEAD
from rich.console import Console
from rich.theme import Theme as RichTheme


class KahlerTheme:
    """Kähler Toolkit 主题配置类"""

    # ==================== 功能状态颜色 ====================
    SUCCESS = "bold green"
    ERROR = "bold red"
    WARNING = "bold yellow"
    INFO = "cyan"
    MUTED = "dim"

    # ==================== UI元素颜色 ====================
    TITLE = "bold magenta"
    SUBTITLE = "bold cyan"
    HEADER = "bold white"
    BORDER = "blue"
    HIGHLIGHT = "yellow"

    # ==================== 判定颜色 ====================
    VERDICT_STYLES = {
        "PASS": "bold green",
        "FAIL": "bold red",
        "NOT-APPLICABLE": "bold yellow",
        "SKIPPED": "dim white",
    }
    VERDICT_ICONS = {
        "PASS": "✅",
        "FAIL": "❌",
        "NOT-APPLICABLE": "➖",
        "SKIPPED": "⏭️",
    }

    # ==================== 盒子样式 ====================
    BOX_DEFAULT = ROUNDED
    BOX_TITLE = DOUBLE
    BOX_TABLE = SIMPLE_HEAD

    PANEL_PADDING = (1, 2)

    @classmethod
    def get_rich_theme(cls) -> RichTheme:
        return RichTheme({
            "success": cls.SUCCESS,
            "error": cls.ERROR,
            "warning": cls.WARNING,
            "info": cls.INFO,
            "muted": cls.MUTED,
            "title": cls.TITLE,
            "subtitle": cls.SUBTITLE,
            "header": cls.HEADER,
            "highlight": cls.HIGHLIGHT,
        })

    @classmethod
    def get_verdict_style(cls, verdict: str) -> str:
        return cls.VERDICT_STYLES.get(str(verdict).upper(), cls.INFO)

    @classmethod
    def get_residual_style(cls, residual: float, tolerance: Optional[float]) -> str:
        """
        残差相对容差的颜色

        低于容差的 1% 为绿色, 低于容差为黄色, 否则为红色
        """
        if tolerance is None:
            return cls.INFO
        magnitude = abs(residual)
        if magnitude < 0.01 * tolerance:
            return "green"
        if magnitude < tolerance:
            return "yellow"
        return "red"


# 全局Console实例 (单例模式)
_console_instance: Optional[Console] = None


def get_console(width: Optional[int] = None, force_terminal: Optional[bool] = None) -> Console:
    """
    获取全局Console实例

    Args:
        width: 控制台宽度 (None表示自动检测)
        force_terminal: 强制终端模式
    """
    global _console_instance

    if _console_instance is None:
        _console_instance = Console(
            theme=KahlerTheme.get_rich_theme(),
            width=width,
            force_terminal=force_terminal,
            highlight=False,
            markup=True,
            soft_wrap=True,
        )

    return _console_instance


def reset_console() -> None:
    """重置控制台实例 (用于测试)"""
    global _console_instance
    _console_instance = None


console = get_console()


__all__ = [
    "KahlerTheme",
    "get_console",
    "reset_console",
    "console",
]
