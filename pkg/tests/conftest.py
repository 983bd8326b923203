"""
共享测试夹具

每个测试使用临时配置目录与输出目录, 关闭文件日志; 采样规模比验收配置小得多。
"""

from pathlib import Path

import numpy as np
import pytest

from kahler_toolkit.config.config_manager import reset_config
from kahler_toolkit.config.run_config import RunConfig
from kahler_toolkit.geometry.catalog import get_manifold

TEST_SETTINGS = """
app:
  log_level: "WARNING"
output:
  reports_dir: "{reports}"
  log_dir: "{logs}"
  formats: ["json", "csv"]
logging:
  enable_file: false
verify:
  samples: 5
  seed: 0
  directions: 20
  pairs: 12
  radii: 6
  lemma_cases: 2
comparison:
  quaternionic_variant: "derived"
  lie_lemma_factor: 4.0
stochastic:
  paths: 200
  T: 0.5
  dt: 1.0e-3
  block_size: 100
  manifold_T: 0.2
  manifold_dt: 2.0e-3
  manifold_paths: 64
  decimation: 10
"""


@pytest.fixture(autouse=True)
def isolated_config(tmp_path: Path, monkeypatch):
    """临时 settings.yaml, 输出写入 tmp_path"""
    config_dir = tmp_path / "config"
    config_dir.mkdir()
    reports = tmp_path / "reports"
    (config_dir / "settings.yaml").write_text(
        TEST_SETTINGS.format(reports=reports.as_posix(), logs=(tmp_path / "logs").as_posix()),
        encoding="utf-8",
    )
    monkeypatch.setenv("KAHLER_CONFIG_DIR", str(config_dir))
    monkeypatch.delenv("KAHLER_OUTPUT_DIR", raising=False)
    reset_config(config_dir)
    yield config_dir
    reset_config()


@pytest.fixture
def reports_dir(tmp_path: Path) -> Path:
    return tmp_path / "reports"


@pytest.fixture
def make_config():
    """RunConfig 工厂: make_config("verify comparison", **{"run.manifold": "cp2"})"""

    def factory(command: str = "test", **overrides) -> RunConfig:
        return RunConfig.build(command, overrides)

    return factory


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def cp2():
    return get_manifold("cp2")


@pytest.fixture
def hp1():
    return get_manifold("hp1")


@pytest.fixture
def flat_c2():
    return get_manifold("flat-c2")
