"""ρ 过程模拟、边界分类与流形扩散"""

import math

import numpy as np
import pytest

from kahler_toolkit.core.errors import GeometryInputError
from kahler_toolkit.geometry.catalog import get_manifold
from kahler_toolkit.geometry.comparison import ComparisonModel, comparison_rhs
from kahler_toolkit.geometry.stochastic import (
    DiffusionConfig,
    boundary_classification,
    make_drift,
    manifold_diffusion,
    radial_distance,
    simulate_rho,
)

MODEL = ComparisonModel(k=1.0, n=2, m=4.0)


def small_config(**changes) -> DiffusionConfig:
    config = DiffusionConfig(model=MODEL, rho0=0.5, T=0.5, dt=1e-3, paths=200, seed=7, block_size=50)
    return config.with_(**changes) if changes else config


class TestDrift:
    def test_comparison_drift_matches_rhs(self):
        drift = make_drift(MODEL)
        r = np.array([0.3, 0.7, 1.2])
        np.testing.assert_allclose(drift.rate(r), comparison_rhs(MODEL, r), rtol=1e-12)
        assert drift.left == 0.0
        assert drift.right == pytest.approx(math.pi / 2)

    def test_log_barrier(self):
        drift = make_drift(MODEL, "log-barrier", barrier=1.0)
        assert drift.right == 1.0
        assert drift.left is None
        assert drift.rate(np.array([0.5]))[0] == pytest.approx(-2.0)

    def test_zero(self):
        drift = make_drift(MODEL, "zero")
        assert np.all(drift.rate(np.array([0.1, 0.2])) == 0.0)
        assert np.all(np.isinf(drift.clearance(np.array([0.1]))))

    def test_unknown(self):
        with pytest.raises(GeometryInputError):
            make_drift(MODEL, "ornstein")


class TestConfig:
    def test_defaults(self):
        config = small_config()
        assert config.barrier == pytest.approx(math.pi / 2)
        assert config.steps == 500
        assert config.fine_step == pytest.approx(1e-3)
        assert config.to_dict()["model"]["k"] == 1.0

    @pytest.mark.parametrize(
        "changes",
        [
            {"rho0": 2.0},
            {"rho0": 0.0},
            {"paths": 0},
            {"refine": 0},
            {"floor": 0.6},
            {"barrier": 2.0},
            {"drift": "ornstein"},
        ],
    )
    def test_rejects(self, changes):
        with pytest.raises(GeometryInputError):
            small_config(**changes)

    def test_barrier_beyond_singularity_allowed_for_zero_drift(self):
        config = small_config(drift="zero", barrier=2.0)
        assert config.barrier == 2.0


class TestSimulateRho:
    def test_comparison_drift_stays_inside(self):
        ensemble = simulate_rho(small_config(), threads=1)
        assert ensemble.terminal.shape == (200,)
        assert ensemble.flagged_count == 0
        assert np.all(ensemble.terminal >= ensemble.config.floor)
        assert ensemble.hit_count <= 200
        missed = ~ensemble.hit
        assert np.all(ensemble.max_rho[missed] < ensemble.config.barrier - 1e-9)
        assert 0.0 < ensemble.moments()["mean"] < math.pi / 2
        assert ensemble.moments()["count"] == 200

    def test_zero_drift_hits_close_barrier(self):
        ensemble = simulate_rho(small_config(drift="zero", barrier=0.6), threads=1)
        assert ensemble.hit_count > 0
        times = ensemble.hit_time[ensemble.hit]
        assert np.all((times > 0.0) & (times <= 0.5 + 1e-12))
        assert np.all(np.isnan(ensemble.hit_time[~ensemble.hit]))
        assert ensemble.max_excursion >= 0.6 - 1e-9

    def test_reproducible_and_thread_independent(self):
        config = small_config()
        serial = simulate_rho(config, threads=1)
        again = simulate_rho(config, threads=1)
        parallel = simulate_rho(config, threads=2)
        np.testing.assert_array_equal(serial.terminal, again.terminal)
        np.testing.assert_array_equal(serial.terminal, parallel.terminal)
        np.testing.assert_array_equal(serial.max_rho, parallel.max_rho)

    def test_seed_changes_paths(self):
        a = simulate_rho(small_config(paths=20), threads=1)
        b = simulate_rho(small_config(paths=20, seed=8), threads=1)
        assert not np.array_equal(a.terminal, b.terminal)

    def test_rows_and_summary(self):
        ensemble = simulate_rho(small_config(paths=10, block_size=4), threads=1)
        rows = ensemble.rows()
        assert len(rows) == 10
        assert list(rows[0]) == ["path_id", "hit", "hit_time", "max_rho", "terminal", "flagged"]
        summary = ensemble.summary()
        assert summary["paths"] == 10
        assert summary["detect_eps"] == 1e-9
        assert summary["steps"]["base_step"] == pytest.approx(1e-3)

    def test_quantile_fan(self):
        ensemble = simulate_rho(small_config(paths=50, record_every=100), threads=1)
        fan = ensemble.quantile_fan()
        assert len(fan) == 6
        assert list(fan[0]) == ["t", "q05", "q25", "q50", "q75", "q95"]
        assert fan[0]["q50"] == pytest.approx(0.5)
        assert fan[-1]["t"] == pytest.approx(0.5)
        for row in fan:
            assert row["q05"] <= row["q50"] <= row["q95"]

    def test_quantile_fan_requires_records(self):
        ensemble = simulate_rho(small_config(paths=5), threads=1)
        with pytest.raises(GeometryInputError):
            ensemble.quantile_fan()


class TestBoundaryClassification:
    def test_comparison_drift_is_inaccessible(self):
        result = boundary_classification(MODEL)
        assert not result.left.accessible
        assert not result.right.accessible
        assert result.interval == (0.0, pytest.approx(math.pi / 2))

    def test_zero_drift_is_regular(self):
        result = boundary_classification(MODEL, drift="zero")
        assert result.left.kind == "regular"
        assert result.right.kind == "regular"
        assert result.right.accessible

    def test_log_barrier_right_end(self):
        result = boundary_classification(MODEL, drift="log-barrier", barrier=1.0)
        assert result.left.accessible
        assert not result.right.accessible
        assert result.to_dict()["right"]["accessible"] is False


class TestManifoldDiffusion:
    def test_flat_mean_square_displacement(self):
        spec = get_manifold("flat-r2")
        ensemble = manifold_diffusion(
            spec, None, [0.5, 0.0], T=0.2, paths=64, seed=3, dt=2e-3, decimation=10, block_size=32, threads=1
        )
        assert ensemble.times.size == 11
        assert ensemble.times[-1] == pytest.approx(0.2)
        np.testing.assert_allclose(ensemble.radial[:, 0], 0.5)
        assert ensemble.run_valid
        assert ensemble.mean_square_displacement()[-1] == pytest.approx(0.8, abs=0.4)

    def test_reproducible(self, cp2):
        q = [0.2, 0.0, 0.0, 0.0]
        kwargs = dict(T=0.05, paths=8, seed=5, dt=5e-3, decimation=5, threads=1)
        first = manifold_diffusion(cp2, None, q, **kwargs)
        second = manifold_diffusion(cp2, None, q, **kwargs)
        np.testing.assert_array_equal(first.radial, second.radial)
        assert len(first.quantile_fan()) == first.times.size
        assert first.summary()["manifold"] == "cp2"

    def test_start_at_base_rejected(self, cp2):
        with pytest.raises(GeometryInputError):
            manifold_diffusion(cp2, None, np.zeros(4), T=0.1, paths=4)

    def test_radial_distance_closed_form(self):
        spec = get_manifold("flat-r2")
        values = radial_distance(spec, np.zeros(2), np.array([[3.0, 4.0], [0.0, 1.0]]))
        np.testing.assert_allclose(values, [5.0, 1.0])
