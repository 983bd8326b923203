"""配置模块: 全局设置、运行配置与流形文件"""

from .config_manager import ConfigManager, get_config, reset_config
from .manifold_config import load_manifold
from .run_config import RunConfig

__all__ = ["ConfigManager", "get_config", "reset_config", "RunConfig", "load_manifold"]
