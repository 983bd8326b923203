"""命令行: 退出码与报告文件"""

import csv
import json

import pytest
import yaml
from loguru import logger
from typer.testing import CliRunner

from kahler_toolkit import __version__
from kahler_toolkit.cli import app

runner = CliRunner()


@pytest.fixture(autouse=True)
def detach_log_sinks():
    """CliRunner 替换的 stderr 在调用结束后关闭, 不让日志写到已关闭的流"""
    yield
    logger.remove()


def invoke(*args):
    return runner.invoke(app, list(args))


def test_version():
    result = invoke("--version")
    assert result.exit_code == 0
    assert __version__ in result.stdout


def test_catalog_writes_report(reports_dir):
    result = invoke("catalog")
    assert result.exit_code == 0, result.stdout
    report = json.loads((reports_dir / "catalog.json").read_text(encoding="utf-8"))
    assert report["verdict"] == "SKIPPED"
    names = {entry["name"] for entry in report["measured"]["entries"]}
    assert {"cp2", "hp1", "flat-c2"} <= names


def test_curvature_report_files(reports_dir):
    result = invoke("curvature", "--manifold", "cp2", "--dir", "1,0,0,0")
    assert result.exit_code == 0, result.stdout
    report = json.loads((reports_dir / "cp2_curvature.json").read_text(encoding="utf-8"))
    assert report["verdict"] == "PASS"
    assert report["config"]["command"] == "curvature"
    assert "parallel" not in report["config"]
    with open(reports_dir / "cp2_curvature.csv", newline="", encoding="utf-8") as f:
        rows = {row["quantity"]: float(row["value"]) for row in csv.DictReader(f)}
    assert rows["H(v)"] == pytest.approx(4.0, abs=1e-8)


def test_same_seed_same_hash(reports_dir, tmp_path):
    other = tmp_path / "second"
    assert invoke("verify", "structure", "--manifold", "flat-c2", "--samples", "3").exit_code == 0
    assert invoke("--output-dir", str(other), "--threads", "2", "verify", "structure",
                  "--manifold", "flat-c2", "--samples", "3").exit_code == 0
    first = json.loads((reports_dir / "flat-c2_structure.json").read_text(encoding="utf-8"))
    second = json.loads((other / "flat-c2_structure.json").read_text(encoding="utf-8"))
    assert first["provenance"]["hash"] == second["provenance"]["hash"]


def test_markdown_format(tmp_path):
    out = tmp_path / "md"
    result = invoke("--output-dir", str(out), "--formats", "md", "verify", "structure", "--manifold", "flat-c2")
    assert result.exit_code == 0
    assert (out / "flat-c2_structure.md").exists()
    assert not (out / "flat-c2_structure.json").exists()


def test_unknown_manifold_exit_code():
    assert invoke("curvature", "--manifold", "cp9x").exit_code == 2


def test_invalid_flag_value_exit_code():
    assert invoke("verify", "structure", "--manifold", "cp2", "--samples", "0").exit_code == 2


def test_unknown_config_key_exit_code(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump({"verify": {"sampels": 3}}), encoding="utf-8")
    assert invoke("--config", str(path), "verify", "structure", "--manifold", "cp2").exit_code == 2


def test_dsl_error_exit_code():
    assert invoke("curvature", "--manifold", "cp2", "--phi", "x1 +* 2").exit_code == 2


def test_numeric_error_exit_code(tmp_path):
    path = tmp_path / "singular.yaml"
    path.write_text(
        yaml.safe_dump({"name": "singular", "kind": "riemannian", "dimension": 2,
                        "metric": {"1,1": "1/x1", "2,2": "1"}}),
        encoding="utf-8",
    )
    assert invoke("curvature", "--manifold", str(path), "--point", "0,0").exit_code == 3


def test_plotdata_rho_writes_csv_only(reports_dir):
    result = invoke("plotdata", "rho", "--m", "4", "--paths", "30", "--T", "0.2", "--record-every", "50")
    assert result.exit_code == 0, result.stdout
    assert not (reports_dir / "model_rho_fan.json").exists()
    with open(reports_dir / "model_rho_fan.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["t", "q05", "q25", "q50", "q75", "q95"]
    assert len(rows) == 5
    assert float(rows[0]["q50"]) == pytest.approx(0.5)


def test_simulate_rho_check_dt_writes_halving_report(reports_dir):
    result = invoke("simulate", "rho", "--m", "4", "--paths", "30", "--T", "0.2", "--check-dt")
    assert result.exit_code in (0, 1), result.stdout
    report = json.loads((reports_dir / "model_dt_halving.json").read_text(encoding="utf-8"))
    assert report["experiment"] == "dt_halving"
    assert report["config"]["stochastic"]["check_dt"] is True
    assert report["aggregates"]["hits"] == [0, 0]


def test_verify_diameter_cp2_passes(reports_dir):
    result = invoke("verify", "diameter", "--manifold", "cp2")
    assert result.exit_code in (0, 1), result.stdout
    report = json.loads((reports_dir / "cp2_diameter.json").read_text(encoding="utf-8"))
    assert report["verdict"] == "PASS"
    assert report["aggregates"]["sharpness_ratio"] <= 1.0 + 1e-3
