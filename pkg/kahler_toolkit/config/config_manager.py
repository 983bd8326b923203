"""
配置管理器模块

负责加载 settings.yaml 并与内置默认值逐节合并。
"""

import copy
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from kahler_toolkit.core.errors import ConfigError
from kahler_toolkit.core.logger import get_logger

logger = get_logger(__name__)

OUTPUT_DIR_ENV = "KAHLER_OUTPUT_DIR"
CONFIG_DIR_ENV = "KAHLER_CONFIG_DIR"

DEFAULT_SETTINGS: Dict[str, Any] = {
    "app": {
        "name": "Kähler Toolkit",
        "log_level": "INFO",
    },
    "output": {
        "reports_dir": "./reports",
        "log_dir": "./logs",
        "formats": ["json", "csv"],
    },
    "logging": {
        "rotation": "10 MB",
        "retention": "30 days",
        "compression": "zip",
        "enable_file": True,
    },
    "numerics": {
        "unit_tol": 1e-8,
        "jet_tol": 1e-8,
        "pipeline_tol": 1e-4,
        "be_denominator": "real-dim",
        "shooting_tol": 1e-7,
        "stencil_step": 1e-2,
        "radial_route": "jacobi",
    },
    "verify": {
        "samples": 20,
        "seed": 0,
        "directions": 200,
        "pairs": 200,
        "radii": 20,
        "lemma_cases": 4,
        "bochner_quaternionic_coefficient": "derived",
    },
    "comparison": {
        "hypothesis_reading": "proof",
        "quaternionic_variant": "printed",
        "alternative_profile": "jacobi",
        "lie_lemma_factor": 1.0,
    },
    "stochastic": {
        "rho0": 0.5,
        "T": 10.0,
        "dt": 1e-4,
        "paths": 10000,
        "floor": 1e-6,
        "drift": "comparison",
        "block_size": 1000,
        "record_every": 0,
        "check_dt": False,
        "manifold_T": 5.0,
        "manifold_dt": 1e-3,
        "manifold_paths": 1000,
        "decimation": 100,
    },
    "parallel": {
        "threads": 1,
    },
}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """递归合并, override 优先; 返回新字典"""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_yaml_mapping(path: Path, what: str = "配置文件") -> Dict[str, Any]:
    """
    读取顶层为映射的YAML文件

    Raises:
        ConfigError: 文件不存在、语法错误或顶层不是映射
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what}不存在: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"{what}解析失败: {path} | {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{what}顶层必须是映射: {path}")
    return data


class ConfigManager:
    """配置管理器类"""

    DEFAULT_CONFIG_DIR = Path("config")
    DEFAULT_SETTINGS_FILE = "settings.yaml"

    def __init__(self, config_dir: Optional[Path] = None):
        """
        初始化配置管理器

        Args:
            config_dir: 配置文件目录路径 (None 时依次使用 KAHLER_CONFIG_DIR 与 ./config)
        """
        env_dir = os.environ.get(CONFIG_DIR_ENV)
        if config_dir is not None:
            self.config_dir = Path(config_dir)
        elif env_dir:
            self.config_dir = Path(env_dir)
        else:
            self.config_dir = self.DEFAULT_CONFIG_DIR
        self._settings: Optional[Dict[str, Any]] = None
        logger.debug(f"配置管理器已初始化 | 配置目录: {self.config_dir}")

    def load_settings(self, file_name: Optional[str] = None) -> Dict[str, Any]:
        """
        加载全局配置, 与内置默认值合并

        文件缺失时使用默认配置; 文件存在但无法解析时抛出 ConfigError。
        """
        config_path = self.config_dir / (file_name or self.DEFAULT_SETTINGS_FILE)
        if not config_path.exists():
            logger.debug(f"配置文件不存在: {config_path}, 使用默认配置")
            self._settings = copy.deepcopy(DEFAULT_SETTINGS)
            return self._settings

        loaded = load_yaml_mapping(config_path)
        unknown = sorted(set(loaded) - set(DEFAULT_SETTINGS))
        if unknown:
            raise ConfigError(f"settings.yaml 含未知配置节: {', '.join(unknown)}")
        self._settings = deep_merge(DEFAULT_SETTINGS, loaded)
        logger.debug(f"配置文件已加载: {config_path}")
        return self._settings

    @property
    def settings(self) -> Dict[str, Any]:
        if self._settings is None:
            self.load_settings()
        return self._settings

    def get(self, key: str, default: Any = None) -> Any:
        """
        获取配置值 (支持点号分隔的嵌套键)

        Args:
            key: 配置键 (e.g., "numerics.pipeline_tol")
            default: 默认值
        """
        value: Any = self.settings
        for k in key.split("."):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def section(self, name: str) -> Dict[str, Any]:
        return copy.deepcopy(self.settings.get(name, {}))

    def output_dir(self) -> Path:
        """输出目录: 环境变量 KAHLER_OUTPUT_DIR 优先于 output.reports_dir"""
        env = os.environ.get(OUTPUT_DIR_ENV)
        return Path(env) if env else Path(self.get("output.reports_dir", "./reports"))


# 全局配置实例 (单例)
_config_instance: Optional[ConfigManager] = None


def get_config() -> ConfigManager:
    """获取全局配置管理器实例"""
    global _config_instance
    if _config_instance is None:
        _config_instance = ConfigManager()
        _config_instance.load_settings()
    return _config_instance


def reset_config(config_dir: Optional[Path] = None) -> ConfigManager:
    """重建全局实例 (测试与 --config-dir 使用)"""
    global _config_instance
    _config_instance = ConfigManager(config_dir)
    _config_instance.load_settings()
    return _config_instance


__all__ = [
    "ConfigManager",
    "DEFAULT_SETTINGS",
    "OUTPUT_DIR_ENV",
    "deep_merge",
    "get_config",
    "load_yaml_mapping",
    "reset_config",
]
