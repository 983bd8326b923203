"""
绘图序列插件

comparison: 沿一条径向测地线的 r, ℒr, 比较右端与余量
rho:        ρ 过程各记录时刻的分位数扇形
"""

from datetime import datetime
from typing import List

from kahler_toolkit.core.logger import LogContext, get_logger
from kahler_toolkit.geometry.comparison import Flavor
from kahler_toolkit.geometry.manifold import ManifoldKind
from kahler_toolkit.geometry.stochastic import FAN_LEVELS, simulate_rho
from kahler_toolkit.core.errors import GeometryInputError
from kahler_toolkit.plugins.base import (
    ExperimentPlan,
    ExperimentResult,
    ParamSpec,
    Plugin,
    PluginCategory,
    Verdict,
    register_plugin,
)
from kahler_toolkit.plugins.inputs import (
    base_from_config,
    config_vector,
    drift_field,
    manifold_from_config,
    model_from_config,
    pipeline_tolerance,
)
from kahler_toolkit.plugins.simulate.rho import diffusion_config
from kahler_toolkit.plugins.verify.comparison import comparison_sweep, sweep_direction, sweep_radii

logger = get_logger(__name__)

COMPARISON_FIELDS = ["r", "lhs", "rhs", "margin"]
FAN_POINTS = 100


@register_plugin
class ComparisonSeriesPlugin(Plugin):
    """比较扫描序列"""

    name = "plotdata_comparison"
    category = PluginCategory.PLOTDATA
    description = "r, ℒr, 比较右端与余量的 CSV 序列"

    def get_required_params(self) -> List[ParamSpec]:
        return [
            ParamSpec("run.manifold", str, "目录项名称或流形文件"),
            ParamSpec("model.k", float, "比较模型的 k", required=False, default=1.0),
            ParamSpec("verify.radii", int, "半径个数", required=False, default=20),
        ]

    def run(self, config) -> List[ExperimentResult]:
        spec = manifold_from_config(config)
        if spec.kind is ManifoldKind.RIEMANNIAN:
            raise GeometryInputError(f"{spec.name} 是黎曼流形, 没有比较右端")
        start = datetime.now()
        count = int(config.get("verify.radii", 20))
        tol = pipeline_tolerance(config)
        model = model_from_config(config, spec).with_(flavor=Flavor.NON_GRADIENT_MZ)
        base = base_from_config(spec, config)
        unit = sweep_direction(spec, base, config.seed, config_vector(spec, config, "direction"))
        with LogContext(experiment="plotdata comparison", seed=config.seed):
            report = comparison_sweep(
                spec, model, base, unit, sweep_radii(spec, model, count),
                z=drift_field(spec, config),
                route=config.get("numerics.radial_route", "jacobi"),
                tolerance=tol,
                seed=config.seed,
                threads=config.threads,
            )
        return [
            ExperimentResult(
                experiment="comparison_series",
                verdict=Verdict.from_flag(report.holds),
                plan=ExperimentPlan(
                    manifold=spec.name,
                    experiment="comparison_series",
                    samples={"radii": count},
                    seeds={"seed": config.seed},
                    tolerances={"margin": tol},
                    output_dir=config.output_dir,
                ),
                measured={"model": model.to_dict(), "direction": [float(c) for c in unit]},
                aggregates={"worst_margin": report.worst_margin, "equality": report.equality},
                rows=report.rows(),
                fieldnames=COMPARISON_FIELDS,
                start_time=start,
                end_time=datetime.now(),
            )
        ]


@register_plugin
class RhoFanPlugin(Plugin):
    """ρ 过程的分位数扇形"""

    name = "plotdata_rho"
    category = PluginCategory.PLOTDATA
    description = "ρ 过程各时刻分位数的 CSV 序列"

    def get_required_params(self) -> List[ParamSpec]:
        return [
            ParamSpec("model.k", float, "比较模型的 k", required=False, default=1.0),
            ParamSpec("model.m", float, "比较模型的 m", required=False),
            ParamSpec("stochastic.record_every", int, "记录间隔 (0 时自动取约 100 个时刻)", required=False),
        ]

    def run(self, config) -> List[ExperimentResult]:
        sim = diffusion_config(config)
        if not sim.record_every:
            sim = sim.with_(record_every=max(1, sim.steps // FAN_POINTS))
        start = datetime.now()
        with LogContext(experiment="plotdata rho", seed=sim.seed):
            ensemble = simulate_rho(sim, threads=config.threads)
            fan = ensemble.quantile_fan()
        top = max(row[f"q{round(FAN_LEVELS[-1] * 100):02d}"] for row in fan)
        return [
            ExperimentResult(
                experiment="rho_fan",
                verdict=Verdict.from_flag(top < sim.barrier),
                plan=ExperimentPlan(
                    manifold=config.get("run.manifold") or "model",
                    experiment="rho_fan",
                    samples={"paths": sim.paths, "record_every": sim.record_every},
                    seeds={"seed": sim.seed},
                    output_dir=config.output_dir,
                ),
                measured={"config": sim.to_dict()},
                aggregates={"hit_count": ensemble.hit_count, "top_quantile_max": top, "barrier": sim.barrier},
                rows=fan,
                fieldnames=["t"] + [f"q{round(level * 100):02d}" for level in FAN_LEVELS],
                start_time=start,
                end_time=datetime.now(),
            )
        ]
