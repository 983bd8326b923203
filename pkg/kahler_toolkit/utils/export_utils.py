"""数据导出工具模块

JSON / CSV / Markdown 导出, 报告封装与内容哈希。
浮点数一律按可精确往返的形式写出 (CSV 使用 17 位有效数字)。
"""

import csv
import hashlib
import json
import math
from dataclasses import asdict, is_dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
from tabulate import tabulate

from kahler_toolkit import __version__
from kahler_toolkit.core.logger import get_logger

logger = get_logger(__name__)

VOLATILE_KEYS = frozenset({"timestamp", "generated_at", "duration"})
FLOAT_FORMAT = ".17g"


def to_serializable(value: Any) -> Any:
    """把 numpy 标量/数组、dataclass、Enum、Path 转为 JSON 原生类型 (保持键顺序)"""
    if isinstance(value, dict):
        return {str(k): to_serializable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_serializable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_serializable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "to_dict"):
        return to_serializable(value.to_dict())
    if is_dataclass(value) and not isinstance(value, type):
        return to_serializable(asdict(value))
    return value


def _format_cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    if isinstance(value, (np.integer, np.bool_)):
        return value.item()
    return value


def _strip_volatile(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _strip_volatile(v) for k, v in value.items() if k not in VOLATILE_KEYS}
    if isinstance(value, list):
        return [_strip_volatile(v) for v in value]
    return value


def canonical_json(data: Any) -> str:
    return json.dumps(to_serializable(data), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def content_hash(data: Any) -> str:
    """
    内容哈希: 去掉 timestamp / generated_at / duration 后规范化 JSON 的 SHA-256

    同一配置与种子的两次运行得到相同哈希。
    """
    payload = canonical_json(_strip_volatile(to_serializable(data)))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def export_to_json(
    data: Any,
    output_path: Path,
    indent: int = 2,
    ensure_ascii: bool = False,
) -> bool:
    """
    导出数据为JSON格式

    Args:
        data: 要导出的数据
        output_path: 输出文件路径
        indent: 缩进空格数
        ensure_ascii: 是否转义非ASCII字符

    Returns:
        True表示成功, False表示失败
    """
    try:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, "w", encoding="utf-8") as f:
            json.dump(to_serializable(data), f, indent=indent, ensure_ascii=ensure_ascii)
        logger.info(f"数据已导出为JSON: {output_path}")
        return True
    except (OSError, TypeError, ValueError) as e:
        logger.error(f"导出JSON失败: {e}")
        return False


def export_to_csv(
    data: List[Dict[str, Any]],
    output_path: Path,
    fieldnames: Optional[List[str]] = None,
) -> bool:
    """
    导出数据为CSV格式

    列顺序取 fieldnames, 缺省为第一行的键顺序; 浮点数写出 17 位有效数字。

    Returns:
        True表示成功, False表示失败
    """
    if not data:
        logger.warning("数据为空,无法导出CSV")
        return False

    try:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        if fieldnames is None:
            fieldnames = list(data[0].keys())
        with open(output_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=fieldnames, extrasaction="ignore")
            writer.writeheader()
            for row in data:
                writer.writerow({k: _format_cell(row.get(k, "")) for k in fieldnames})
        logger.info(f"数据已导出为CSV: {output_path}")
        return True
    except (OSError, ValueError) as e:
        logger.error(f"导出CSV失败: {e}")
        return False


def format_table(rows: Iterable[Dict[str, Any]], columns: Optional[List[str]] = None,
                 tablefmt: str = "github", floatfmt: str = ".6g") -> str:
    """用 tabulate 渲染纯文本/Markdown 表格"""
    rows = list(rows)
    if not rows:
        return ""
    columns = columns or list(rows[0].keys())
    body = [[to_serializable(row.get(c, "")) for c in columns] for row in rows]
    return tabulate(body, headers=columns, tablefmt=tablefmt, floatfmt=floatfmt)


def export_to_markdown(report: Dict[str, Any], output_path: Path) -> bool:
    """
    导出报告摘要为Markdown: 判定、聚合量表格、说明

    Returns:
        True表示成功, False表示失败
    """
    try:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"# {report.get('experiment', 'report')}", ""]
        lines.append(f"**判定:** {report.get('verdict', '-')}")
        lines.append("")
        aggregates = flatten_dict(to_serializable(report.get("aggregates", {})))
        if aggregates:
            lines.append(format_table([{"key": k, "value": v} for k, v in aggregates.items()]))
            lines.append("")
        for note in report.get("notes", []):
            lines.append(f"- {note}")
        provenance = report.get("provenance", {})
        lines.extend(["", "---", f"*hash {provenance.get('hash', '-')}*"])
        output_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info(f"数据已导出为Markdown: {output_path}")
        return True
    except OSError as e:
        logger.error(f"导出Markdown失败: {e}")
        return False


def generate_report_filename(
    prefix: str,
    extension: str = "json",
    timestamp: bool = False,
) -> str:
    """
    生成报告文件名

    缺省不加时间戳, 同一输出目录中重复运行会覆盖旧报告。
    """
    if timestamp:
        ts = datetime.now().strftime("%Y%m%d_%H%M%S")
        return f"{prefix}_{ts}.{extension}"
    return f"{prefix}.{extension}"


def build_report(
    experiment: str,
    plan: Dict[str, Any],
    measured: Dict[str, Any],
    aggregates: Dict[str, Any],
    verdict: str,
    notes: Optional[List[str]] = None,
    config: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """
    组装实验报告, 附带配置回显与内容哈希

    哈希在加入 generated_at 之前计算, 只依赖内容。
    """
    report: Dict[str, Any] = {
        "experiment": experiment,
        "plan": to_serializable(plan),
        "measured": to_serializable(measured),
        "aggregates": to_serializable(aggregates),
        "verdict": verdict,
        "notes": list(notes or []),
        "config": to_serializable(config or {}),
    }
    report["provenance"] = {"hash": content_hash(report), "version": __version__}
    report["generated_at"] = datetime.now().isoformat(timespec="seconds")
    return report


def save_report(
    data: Any,
    report_dir: Path,
    prefix: str = "report",
    format: str = "json",
    fieldnames: Optional[List[str]] = None,
) -> Optional[Path]:
    """
    保存报告文件

    Args:
        data: 报告数据 (csv 格式要求行列表)
        report_dir: 报告目录
        prefix: 文件名前缀
        format: 导出格式 (json/csv/md)

    Returns:
        保存的文件路径, 失败返回None
    """
    report_dir = Path(report_dir)
    fmt = format.lower()
    ext_map = {"json": "json", "csv": "csv", "md": "md", "markdown": "md"}
    if fmt not in ext_map:
        logger.error(f"不支持的导出格式: {format}")
        return None
    output_path = report_dir / generate_report_filename(prefix, extension=ext_map[fmt])

    if fmt == "json":
        success = export_to_json(data, output_path)
    elif fmt == "csv":
        if isinstance(data, dict):
            data = [data]
        success = export_to_csv(list(data), output_path, fieldnames)
    else:
        success = export_to_markdown(data, output_path)
    return output_path if success else None


def flatten_dict(data: Dict[str, Any], parent_key: str = "", sep: str = ".") -> Dict[str, Any]:
    """
    扁平化嵌套字典

    Args:
        data: 嵌套字典
        parent_key: 父键名
        sep: 键分隔符
    """
    items = []
    for k, v in data.items():
        new_key = f"{parent_key}{sep}{k}" if parent_key else k
        if isinstance(v, dict):
            items.extend(flatten_dict(v, new_key, sep=sep).items())
        else:
            items.append((new_key, v))
    return dict(items)


def is_finite_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


__all__ = [
    "to_serializable",
    "canonical_json",
    "content_hash",
    "export_to_json",
    "export_to_csv",
    "export_to_markdown",
    "format_table",
    "generate_report_filename",
    "build_report",
    "save_report",
    "flatten_dict",
    "is_finite_number",
]
