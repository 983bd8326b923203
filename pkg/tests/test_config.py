"""配置合并、校验与流形文件"""

from pathlib import Path

import pytest
import yaml

from kahler_toolkit.config.config_manager import get_config, reset_config
from kahler_toolkit.config.manifold_config import load_manifold, manifold_from_mapping
from kahler_toolkit.config.run_config import RunConfig, parse_vector, split_dotted
from kahler_toolkit.core.errors import ConfigError, DSLSyntaxError, EXIT_CONFIG
from kahler_toolkit.geometry.manifold import ManifoldKind


def write_yaml(path: Path, data) -> Path:
    path.write_text(yaml.safe_dump(data, allow_unicode=True), encoding="utf-8")
    return path


class TestSettings:
    def test_test_settings_are_loaded(self):
        config = get_config()
        assert config.get("verify.samples") == 5
        assert config.get("numerics.pipeline_tol") == pytest.approx(1e-4)
        assert config.get("no.such.key", "fallback") == "fallback"

    def test_unknown_section_rejected(self, tmp_path):
        bad = tmp_path / "bad"
        bad.mkdir()
        (bad / "settings.yaml").write_text("network:\n  timeout: 3\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            reset_config(bad)

    def test_missing_file_uses_defaults(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        manager = reset_config(empty)
        assert manager.get("verify.samples") == 20
        assert manager.get("comparison.lie_lemma_factor") == 1.0

    def test_output_dir_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("KAHLER_OUTPUT_DIR", str(tmp_path / "elsewhere"))
        assert get_config().output_dir() == tmp_path / "elsewhere"


class TestRunConfig:
    def test_settings_layer(self, make_config, reports_dir):
        config = make_config()
        assert config.get("verify.samples") == 5
        assert config.seed == 0
        assert config.threads == 1
        assert config.output_dir == reports_dir
        assert config.formats == ["json", "csv"]
        assert config.get("model.flavor") == "non_gradient_mZ"

    def test_flags_override_settings(self, make_config):
        config = make_config(**{"verify.samples": 3, "verify.seed": 11})
        assert config.get("verify.samples") == 3
        assert config.seed == 11

    def test_none_flags_are_ignored(self, make_config):
        assert make_config(**{"verify.samples": None}).get("verify.samples") == 5

    def test_precedence_and_sources(self, tmp_path):
        path = write_yaml(tmp_path / "run.yaml", {"verify": {"samples": 7, "pairs": 30}, "model": {"flavor": "non-gradient"}})
        config = RunConfig.build("verify diameter", {"verify.samples": 9}, config_file=path)
        assert config.get("verify.samples") == 9
        assert config.get("verify.pairs") == 30
        assert config.get("model.flavor") == "non_gradient_mZ"
        assert config.sources == ["defaults", "settings.yaml", str(path), "flags"]

    def test_flavor_alias(self, make_config):
        assert make_config(**{"model.flavor": "gradient-riccati"}).get("model.flavor") == "gradient_riccati"

    @pytest.mark.parametrize(
        "overrides",
        [
            {"verify.bogus": 1},
            {"network.timeout": 3},
            {"verify.samples": 0},
            {"verify.samples": 2.5},
            {"model.k": 0.0},
            {"model.flavor": "gradient"},
            {"numerics.radial_route": "spline"},
            {"output.formats": "json,xlsx"},
            {"stochastic.check_dt": "maybe"},
        ],
    )
    def test_invalid_values(self, make_config, overrides):
        with pytest.raises(ConfigError) as info:
            make_config(**overrides)
        assert info.value.exit_code == EXIT_CONFIG

    def test_unknown_key_in_file(self, tmp_path):
        path = write_yaml(tmp_path / "run.yaml", {"verify": {"sample": 3}})
        with pytest.raises(ConfigError) as info:
            RunConfig.build("x", config_file=path)
        assert info.value.details["key"] == "verify.sample"

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.build("x", config_file=tmp_path / "absent.yaml")

    def test_coercion(self, make_config):
        config = make_config(**{"run.point": "0.1, 0.2", "stochastic.check_dt": "yes", "output.formats": "json,md"})
        assert config.get("run.point") == [0.1, 0.2]
        assert config.get("stochastic.check_dt") is True
        assert config.formats == ["json", "md"]

    def test_output_dir_flag(self, make_config, tmp_path):
        assert make_config(**{"output.dir": str(tmp_path / "out")}).output_dir == tmp_path / "out"

    def test_echo_excludes_threads_and_output(self, make_config):
        echo = make_config("verify structure", **{"parallel.threads": 4}).to_dict()
        assert echo["command"] == "verify structure"
        assert "parallel" not in echo
        assert "output" not in echo
        assert echo["verify"]["samples"] == 5

    def test_split_dotted(self):
        assert split_dotted({"model.k": 1, "model.m": None}) == {"model": {"k": 1}}
        with pytest.raises(ConfigError):
            split_dotted({"k": 1})

    def test_parse_vector(self):
        assert parse_vector("1;0, 2") == [1.0, 0.0, 2.0]
        with pytest.raises(ConfigError):
            parse_vector("a,b")
        with pytest.raises(ConfigError):
            parse_vector("")


class TestManifoldFile:
    def test_catalog_name(self):
        assert load_manifold("cp2").name == "cp2"

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            load_manifold("cp7x")

    def test_catalog_reference(self, tmp_path):
        path = write_yaml(tmp_path / "alias.yaml", {"catalog": "hp1"})
        assert load_manifold(str(path)).kind is ManifoldKind.QUATERNIONIC

    def test_custom_metric(self, tmp_path):
        data = {
            "name": "warped",
            "kind": "kahler",
            "dimension": 2,
            "metric": {"1,1": "1 + 0.1*x1^2", "2,2": "1 + 0.1*x1^2"},
            "structures": [[["0", "-1"], ["1", "0"]]],
            "chart_domain": {"ball": 2.0},
            "base_point": [0, 0],
        }
        spec = load_manifold(str(write_yaml(tmp_path / "warped.yaml", data)))
        assert spec.name == "warped"
        assert spec.dimension == 2
        g = spec.metric([1.0, 0.0])
        assert g[0, 0] == pytest.approx(1.1)
        assert g[0, 1] == 0.0
        assert spec.metadata["needs_validation"]

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            manifold_from_mapping({"kind": "kahler", "dimension": 2, "metric": {"1,1": "1"}, "colour": "red"})

    def test_missing_field(self):
        with pytest.raises(ConfigError):
            manifold_from_mapping({"kind": "kahler", "metric": {"1,1": "1"}})

    def test_bad_expression(self):
        with pytest.raises(DSLSyntaxError):
            manifold_from_mapping({"kind": "riemannian", "dimension": 1, "metric": {"1,1": "1 +"}})

    def test_bad_kind(self):
        with pytest.raises(ConfigError):
            manifold_from_mapping({"kind": "lorentzian", "dimension": 1, "metric": {"1,1": "1"}})
