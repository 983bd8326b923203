"""工具函数模块"""

from .export_utils import build_report, content_hash, export_to_csv, export_to_json, save_report
from .parallel import deterministic_map

__all__ = [
    "build_report",
    "content_hash",
    "export_to_csv",
    "export_to_json",
    "save_report",
    "deterministic_map",
]
