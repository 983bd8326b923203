"""
可复用UI组件模块

实验结果、曲率查询与目录列表的 rich 呈现。
"""

from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from rich.console import Group
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from .theme import KahlerTheme, console

MAX_ROWS = 12


def format_value(value: Any) -> str:
    """数值用 6 位有效数字, 序列逐项格式化"""
    if isinstance(value, (bool, np.bool_)):
        return "是" if value else "否"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    if value is None:
        return "-"
    return str(value)


def create_header_panel(title: str, subtitle: str = "") -> Panel:
    parts = [Text(title, style=KahlerTheme.TITLE, justify="center")]
    if subtitle:
        parts.append(Text(subtitle, style=KahlerTheme.SUBTITLE, justify="center"))
    return Panel(
        Group(*parts),
        box=KahlerTheme.BOX_TITLE,
        border_style=KahlerTheme.BORDER,
        padding=KahlerTheme.PANEL_PADDING,
        expand=True,
    )


def create_verdict_text(verdict: str, message: str = "") -> Text:
    """带图标的判定文本"""
    key = str(verdict).upper()
    style = KahlerTheme.get_verdict_style(key)
    text = Text()
    text.append(f"{KahlerTheme.VERDICT_ICONS.get(key, '•')} {key}", style=style)
    if message:
        text.append(f"  {message}")
    return text


def create_result_table(
    title: str,
    rows: Sequence[Dict[str, Any]],
    fieldnames: Optional[List[str]] = None,
    limit: int = MAX_ROWS,
) -> Table:
    """
    逐样本序列的表格, 超过 limit 行时只显示首尾

    Args:
        title: 表格标题
        rows: 行字典列表
        fieldnames: 列顺序, 缺省为第一行的键
        limit: 显示的最大行数
    """
    columns = fieldnames or (list(rows[0].keys()) if rows else [])
    table = Table(
        title=title,
        title_style=KahlerTheme.SUBTITLE,
        box=KahlerTheme.BOX_TABLE,
        header_style=KahlerTheme.HEADER,
        border_style=KahlerTheme.BORDER,
    )
    for name in columns:
        table.add_column(name, justify="right" if name not in ("check", "quantity", "side", "kind") else "left")

    shown: List[Optional[Dict[str, Any]]] = list(rows)
    if len(rows) > limit:
        half = limit // 2
        shown = list(rows[:half]) + [None] + list(rows[-half:])
    for row in shown:
        if row is None:
            table.add_row(*["⋮"] * len(columns), style=KahlerTheme.MUTED)
            continue
        table.add_row(*[format_value(row.get(name)) for name in columns])
    return table


def create_summary_panel(title: str, stats: Dict[str, Any], verdict: Optional[str] = None) -> Panel:
    """键值汇总面板, 嵌套字典展开为 a.b"""
    lines = []
    if verdict is not None:
        lines.append(create_verdict_text(verdict))
    for key, value in stats.items():
        if isinstance(value, dict):
            for sub, inner in value.items():
                lines.append(_stat_line(f"{key}.{sub}", inner))
        else:
            lines.append(_stat_line(key, value))
    border = KahlerTheme.get_verdict_style(verdict) if verdict else KahlerTheme.BORDER
    return Panel(
        Group(*lines),
        title=f"[{KahlerTheme.TITLE}]{title}[/]",
        box=KahlerTheme.BOX_DEFAULT,
        border_style=border,
        padding=KahlerTheme.PANEL_PADDING,
    )


def _stat_line(key: str, value: Any) -> Text:
    text = Text()
    text.append(f"{key}: ", style=KahlerTheme.HEADER)
    text.append(format_value(value), style=KahlerTheme.INFO)
    return text


def show_experiment(result, show_rows: bool = True) -> None:
    """打印一个实验结果: 汇总面板, 说明, 样本表"""
    scalars = {
        k: v for k, v in result.aggregates.items()
        if not isinstance(v, (list, dict)) or (isinstance(v, list) and len(v) <= 8)
    }
    if result.duration is not None:
        scalars["耗时"] = f"{result.duration:.2f}秒"
    console.print(create_summary_panel(result.experiment, scalars, result.verdict.value))
    for note in result.notes:
        console.print(f"  [muted]• {note}[/muted]")
    if show_rows and result.rows:
        console.print(create_result_table(f"{result.experiment} 样本", result.rows, result.fieldnames))


def show_saved(paths: Iterable) -> None:
    for path in paths:
        console.print(f"[success]报告已保存:[/success] {path}")


def create_catalog_table(entries: Sequence[Dict[str, Any]]) -> Table:
    """目录列表, 带验证状态"""
    table = Table(
        title="流形目录",
        title_style=KahlerTheme.TITLE,
        box=KahlerTheme.BOX_TABLE,
        header_style=KahlerTheme.HEADER,
    )
    for name in ("name", "kind", "dimension", "diameter", "einstein", "status", "description"):
        table.add_column(name)
    for entry in entries:
        status = str(entry.get("status", ""))
        style = {"validated": "green", "closed-form": "green", "failed": "red"}.get(status, "yellow")
        table.add_row(
            entry["name"],
            str(entry.get("kind", "")),
            str(entry.get("dimension", "")),
            format_value(entry.get("diameter")),
            format_value(entry.get("einstein")),
            Text(status, style=style),
            str(entry.get("description", "")),
        )
    return table


__all__ = [
    "format_value",
    "create_header_panel",
    "create_verdict_text",
    "create_result_table",
    "create_summary_panel",
    "create_catalog_table",
    "show_experiment",
    "show_saved",
]
