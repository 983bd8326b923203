"""插件注册、判定合并与小规模运行"""

import importlib
import math
from datetime import datetime, timedelta

import pytest

from kahler_toolkit.cli import PLUGIN_MODULES
from kahler_toolkit.core.errors import ConfigError
from kahler_toolkit.plugins.base import (
    ExperimentPlan,
    ExperimentResult,
    ResidualReport,
    Verdict,
    get_plugin,
    get_registered_plugins,
)
from kahler_toolkit.plugins.inputs import manifold_from_config


@pytest.fixture(scope="module", autouse=True)
def registered():
    for module in set(PLUGIN_MODULES.values()):
        importlib.import_module(module)


def run_plugin(name, make_config, command="test", **overrides):
    plugin = get_plugin(name)
    assert plugin.initialize()
    return plugin.run(make_config(command, **overrides))


class TestRegistry:
    def test_all_plugins_registered(self):
        assert set(PLUGIN_MODULES) <= set(get_registered_plugins())

    def test_unknown_plugin(self):
        with pytest.raises(ConfigError):
            get_plugin("verify_everything")

    def test_params_declared(self):
        for name in PLUGIN_MODULES:
            params = get_plugin(name).get_required_params()
            assert all("." in p.name for p in params)


class TestVerdict:
    @pytest.mark.parametrize(
        "verdicts, expected",
        [
            ([Verdict.PASS, Verdict.NOT_APPLICABLE], Verdict.PASS),
            ([Verdict.PASS, Verdict.FAIL], Verdict.FAIL),
            ([Verdict.NOT_APPLICABLE, Verdict.SKIPPED], Verdict.NOT_APPLICABLE),
            ([], Verdict.SKIPPED),
        ],
    )
    def test_overall(self, verdicts, expected):
        assert Verdict.overall(verdicts) is expected

    def test_plan_rejects_non_positive_tolerance(self):
        with pytest.raises(ConfigError):
            ExperimentPlan(manifold="cp2", experiment="x", tolerances={"jet": 0.0})

    def test_residual_report(self):
        report = ResidualReport(rows=[{"residual": 1e-10}, {"residual": -3e-9}], tolerance=1e-8)
        assert report.passed
        assert report.max_abs_residual == pytest.approx(3e-9)
        assert set(report.quantiles) == {"q50", "q90", "q99"}
        assert not ResidualReport(rows=[{"residual": 1.0}], tolerance=1e-8).passed

    def test_duration(self):
        plan = ExperimentPlan(manifold="cp2", experiment="x")
        start = datetime(2026, 1, 1, 12, 0, 0)
        result = ExperimentResult("x", Verdict.PASS, plan, start_time=start, end_time=start + timedelta(seconds=1.5))
        assert result.duration == pytest.approx(1.5)
        assert ExperimentResult("x", Verdict.PASS, plan).duration is None


class TestCurvaturePlugin:
    def test_cp2_direction(self, make_config):
        (result,) = run_plugin(
            "curvature", make_config, "curvature", **{"run.manifold": "cp2", "run.direction": "1,0,0,0"}
        )
        assert result.verdict is Verdict.PASS
        assert result.aggregates["scalar"] == pytest.approx(24.0, abs=1e-8)
        assert result.aggregates["H(v)"] == pytest.approx(4.0, abs=1e-8)
        assert result.aggregates["ric_perp_decomposition"] == pytest.approx(2.0, abs=1e-8)
        assert result.fieldnames == ["quantity", "value"]

    def test_requires_manifold(self, make_config):
        with pytest.raises(ConfigError):
            run_plugin("curvature", make_config, "curvature")


class TestVerifyPlugins:
    def test_structure_flat(self, make_config):
        (result,) = run_plugin("verify_structure", make_config, "verify structure", **{"run.manifold": "flat-c2"})
        assert result.verdict is Verdict.PASS
        checks = {row["check"] for row in result.rows}
        assert {"structure_parallelism", "j_invariance", "einstein_constant"} <= checks

    def test_comparison_experiments(self, make_config):
        results = run_plugin(
            "verify_comparison", make_config, "verify comparison", **{"run.manifold": "cp2", "verify.radii": 3}
        )
        assert [r.experiment for r in results] == [
            "laplacian_comparison",
            "comparison_canary",
            "riccati_comparison",
        ]
        sweep = results[0]
        assert sweep.verdict is Verdict.PASS
        assert sweep.aggregates["k_used"] == pytest.approx(1.0, abs=1e-6)
        assert sweep.aggregates["equality"] is True
        assert len(sweep.rows) == 3
        canary = results[1]
        assert canary.verdict is Verdict.PASS
        assert canary.aggregates["detected"] is True
        if not canary.aggregates["positive"]:
            assert any("余量为负" in note for note in canary.notes)
        assert results[2].verdict is Verdict.PASS
        assert results[2].aggregates["zero_c_blowdown"] == pytest.approx(3.14159265, abs=1e-3)

    def test_comparison_on_riemannian_is_not_applicable(self, make_config):
        results = run_plugin("verify_comparison", make_config, **{"run.manifold": "flat-r2"})
        assert Verdict.overall(r.verdict for r in results) is Verdict.NOT_APPLICABLE
        assert all(r.notes for r in results)

    def test_diameter_cp2_is_sharp(self, make_config):
        diameter, lemmas = run_plugin("verify_diameter", make_config, "verify diameter", **{"run.manifold": "cp2"})
        assert diameter.experiment == "diameter"
        assert lemmas.experiment == "integral_lemmas"
        assert diameter.verdict is Verdict.PASS
        aggregates = diameter.aggregates
        assert aggregates["distance_route"] == "closed-form"
        assert aggregates["failed_pairs"] == 0
        assert aggregates["bound"] == pytest.approx(math.pi / 2, abs=1e-6)
        assert aggregates["holds"]
        assert 0.5 < aggregates["sharpness_ratio"] <= 1.0 + 1e-3
        assert aggregates["shooting_crosscheck"] < 1e-4
        assert len(diameter.rows) == 12

    def test_lemma_cases_leaving_chart_are_noted(self, make_config):
        config = make_config("verify diameter", **{"run.manifold": "cp2", "verify.lemma_cases": 8})
        plugin = get_plugin("verify_diameter")
        result = plugin.integral_lemmas(manifold_from_config(config), config)
        assert result.experiment == "integral_lemmas"
        skipped = [row for row in result.rows if row["lemma"] == "-"]
        assert len(result.notes) == len(skipped)
        assert result.aggregates.get("checked", 0) + 2 * len(skipped) == 16

    def test_diameter_on_riemannian_is_not_applicable(self, make_config):
        diameter, _ = run_plugin("verify_diameter", make_config, **{"run.manifold": "flat-r2"})
        assert diameter.verdict is Verdict.NOT_APPLICABLE

    def test_limits_cp2(self, make_config):
        limits, conjugate = run_plugin("verify_limits", make_config, "verify limits", **{"run.manifold": "cp2"})
        assert limits.experiment == "small_r_limits"
        assert limits.verdict is Verdict.PASS
        assert limits.aggregates["r*orthogonal_laplacian_limit"] == pytest.approx(2.0, abs=1e-3)
        assert limits.aggregates["r*rhs_limit"] == pytest.approx(limits.aggregates["r*rhs_target"], abs=1e-6)
        assert conjugate.experiment == "first_conjugate_time"
        assert conjugate.verdict is Verdict.PASS
        assert conjugate.aggregates["expected"] == pytest.approx(math.pi / 2)
        assert all(t == pytest.approx(math.pi / 2, abs=1e-3) for t in conjugate.aggregates["times"])

    def test_limits_flat_has_no_conjugate_points(self, make_config):
        _, conjugate = run_plugin("verify_limits", make_config, **{"run.manifold": "flat-c2"})
        assert conjugate.verdict is Verdict.PASS
        assert conjugate.aggregates["times"] == [None, None, None]

    def test_bochner_quaternionic_flat_is_not_vacuous(self, make_config):
        residual, modified = run_plugin(
            "verify_bochner", make_config, "verify bochner", **{"run.manifold": "flat-h2", "verify.samples": 3}
        )
        assert residual.experiment == "bochner_residual_quaternionic"
        assert residual.measured["test_function"] == "polynomial"
        assert residual.verdict is Verdict.PASS
        assert residual.aggregates["vacuous"] is False
        assert residual.aggregates["max_abs_residual"] < 1e-8
        assert len(residual.rows) == 6
        assert modified.verdict is Verdict.NOT_APPLICABLE

    def test_bochner_random_polynomials_flat_c2(self, make_config):
        overrides = {"run.manifold": "flat-c2", "verify.samples": 5, "verify.seed": 3}
        residual, _ = run_plugin("verify_bochner", make_config, "verify bochner", **overrides)
        assert residual.measured["test_function"] == "polynomial"
        assert residual.verdict is Verdict.PASS
        assert residual.aggregates["max_abs_residual"] < 1e-9
        assert {row["frame"] for row in residual.rows} == {"index-order", "reversed-order"}
        assert len({row["point"] for row in residual.rows}) == 5
        again, _ = run_plugin("verify_bochner", make_config, "verify bochner", **overrides)
        assert [row["residual"] for row in again.rows] == [row["residual"] for row in residual.rows]


class TestSimulatePlugins:
    def test_rho_results(self, make_config):
        results = run_plugin("simulate_rho", make_config, "simulate rho", **{"model.m": 4.0, "stochastic.paths": 40})
        assert [r.experiment for r in results] == ["rho_simulation", "boundary_classification"]
        assert len(results[0].rows) == 40
        assert results[0].plan.samples["paths"] == 40

    def test_rho_dt_halving(self, make_config):
        results = run_plugin(
            "simulate_rho", make_config, "simulate rho",
            **{"model.m": 4.0, "stochastic.paths": 40, "stochastic.T": 0.2, "stochastic.check_dt": True},
        )
        assert [r.experiment for r in results] == ["rho_simulation", "boundary_classification", "dt_halving"]
        halving = results[2]
        coarse, fine = halving.aggregates["fine_steps"]
        assert fine == pytest.approx(coarse / 2)
        assert halving.aggregates["hits"] == [0, 0]
        assert [row["dt"] for row in halving.rows] == [coarse, fine]

    def test_manifold_flat_mean_square_displacement(self, make_config):
        (result,) = run_plugin(
            "simulate_manifold", make_config, "simulate manifold",
            **{"run.manifold": "flat-r2", "stochastic.manifold_paths": 10000, "stochastic.block_size": 500},
        )
        check = result.aggregates["checks"]["mean_square_displacement"]
        assert check["expected"] == pytest.approx(2.0 * 2 * 0.2)
        assert check["relative_error"] < 0.05
        assert result.verdict is Verdict.PASS

    def test_manifold_cp2_stays_below_diameter(self, make_config):
        (result,) = run_plugin("simulate_manifold", make_config, "simulate manifold", **{"run.manifold": "cp2"})
        check = result.aggregates["checks"]["diameter_ceiling"]
        assert check["ceiling"] == pytest.approx(math.pi / 2)
        assert check["passed"]
        assert result.aggregates["paths"] == 64

    def test_rho_fan(self, make_config):
        (result,) = run_plugin(
            "plotdata_rho", make_config, "plotdata rho", **{"model.m": 4.0, "stochastic.paths": 30, "stochastic.T": 0.2}
        )
        assert result.fieldnames == ["t", "q05", "q25", "q50", "q75", "q95"]
        assert result.rows[0]["t"] == 0.0
        assert result.rows[-1]["t"] == pytest.approx(0.2)
