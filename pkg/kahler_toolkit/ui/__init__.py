"""
Kähler Toolkit UI模块

终端输出的主题与 rich 组件; 只用于展示, 报告文件不依赖它。
"""

from .theme import KahlerTheme, get_console

__all__ = ["KahlerTheme", "get_console"]
