"""
一维比较扩散模拟插件

dρ = √2 dβ + b(ρ) dt 的命中统计、两端的数值 Feller 分类与二者的一致性;
可选 dt 减半比较 (同一条 Brownian 路径在两种分辨率下的结果)。
"""

from datetime import datetime
from typing import Dict, List, Optional

import numpy as np

from kahler_toolkit.core.logger import LogContext, get_logger
from kahler_toolkit.geometry.comparison import ComparisonModel, ModelKind
from kahler_toolkit.geometry.stochastic import (
    DiffusionConfig,
    DiffusionEnsemble,
    boundary_classification,
    simulate_rho,
)
from kahler_toolkit.plugins.base import (
    ExperimentPlan,
    ExperimentResult,
    ParamSpec,
    Plugin,
    PluginCategory,
    Verdict,
    register_plugin,
)
from kahler_toolkit.plugins.inputs import model_from_config

logger = get_logger(__name__)

# 命中数为零时, 至少这么多路径才要求分类给出 "不可达"
COHERENCE_PATHS = 10_000
MOMENT_TOL = 0.02
PATH_FIELDS = ["path_id", "hit", "hit_time", "max_rho", "terminal", "flagged"]
ENDPOINT_FIELDS = ["side", "location", "kind", "accessible", "scale_ratio", "speed_ratio", "settled"]


def rho_model(config) -> ComparisonModel:
    """
    ρ 过程的比较模型

    没有 --manifold 也没有 --n 时, n 取 m 能容纳的最大值 (m=4 的凯勒模型即 ℂP²); 漂移只依赖 k 与 m。
    """
    if config.get("run.manifold") is not None:
        from kahler_toolkit.plugins.inputs import manifold_from_config

        return model_from_config(config, manifold_from_config(config))
    if config.get("model.n") is not None:
        return model_from_config(config)
    kind = ModelKind(config.get("model.kind") or ModelKind.KAHLER.value)
    block = 2 if kind is ModelKind.KAHLER else 4
    m = config.get("model.m")
    n = max(1, int(m // block)) if m is not None else 1
    return ComparisonModel(
        k=float(config.get("model.k", 1.0)),
        n=n,
        m=m,
        kind=kind,
        variant=config.get("comparison.quaternionic_variant", "printed"),
    )


def diffusion_config(config, model: Optional[ComparisonModel] = None) -> DiffusionConfig:
    """stochastic 配置节 → DiffusionConfig"""
    model = model or rho_model(config)
    return DiffusionConfig(
        model=model,
        rho0=float(config.get("stochastic.rho0", 0.5)),
        T=float(config.get("stochastic.T", 10.0)),
        dt=float(config.get("stochastic.dt", 1e-4)),
        paths=int(config.get("stochastic.paths", 10_000)),
        seed=config.seed,
        barrier=config.get("stochastic.barrier"),
        floor=float(config.get("stochastic.floor", 1e-6)),
        drift=config.get("stochastic.drift", "comparison"),
        block_size=int(config.get("stochastic.block_size", 1000)),
        record_every=int(config.get("stochastic.record_every", 0)),
    )


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


@register_plugin
class RhoSimulatePlugin(Plugin):
    """一维比较扩散模拟插件"""

    name = "simulate_rho"
    category = PluginCategory.SIMULATE
    description = "比较扩散 ρ 的命中统计与边界分类"

    def get_required_params(self) -> List[ParamSpec]:
        return [
            ParamSpec("model.k", float, "比较模型的 k", required=False, default=1.0),
            ParamSpec("model.m", float, "比较模型的 m", required=False),
            ParamSpec("stochastic.rho0", float, "初值", required=False, default=0.5),
            ParamSpec("stochastic.paths", int, "路径数", required=False, default=10_000),
            ParamSpec("stochastic.dt", float, "基本步长", required=False, default=1e-4),
        ]

    def run(self, config) -> List[ExperimentResult]:
        sim = diffusion_config(config)
        plan = ExperimentPlan(
            manifold=config.get("run.manifold") or "model",
            experiment="rho_simulation",
            samples={"paths": sim.paths, "steps": sim.steps},
            seeds={"seed": sim.seed},
            tolerances={"detect_eps": 1e-9, "moments": MOMENT_TOL},
            output_dir=config.output_dir,
        )
        with LogContext(experiment="simulate rho", seed=sim.seed):
            start = datetime.now()
            ensemble = simulate_rho(sim, threads=config.threads)
            results = [self.hitting(ensemble, plan, start)]
            results.append(self.boundaries(ensemble, plan))
            if config.get("stochastic.check_dt", False):
                results.append(self.dt_halving(ensemble, plan, config.threads))
        return results

    def hitting(self, ensemble: DiffusionEnsemble, plan: ExperimentPlan, start: datetime) -> ExperimentResult:
        """
        命中统计

        比较漂移: 零命中且所有路径的最大值低于屏障为 PASS; 测试漂移只报告统计。
        """
        sim = ensemble.config
        summary = ensemble.summary()
        notes = []
        if sim.drift == "comparison":
            verdict = Verdict.from_flag(ensemble.hit_count == 0 and ensemble.max_excursion < sim.barrier)
        else:
            verdict = Verdict.NOT_APPLICABLE
            notes.append(f"漂移 {sim.drift} 为测试用漂移, 只报告统计")
        if sim.model.kind is ModelKind.QUATERNIONIC:
            notes.append("四元模型的两种屏障约定见 aggregates.barriers")
        if ensemble.flagged_count:
            notes.append(f"{ensemble.flagged_count} 条路径步长下溢, 未计入统计")
        return ExperimentResult(
            experiment="rho_simulation",
            verdict=verdict,
            plan=plan,
            measured={"config": sim.to_dict()},
            aggregates=summary,
            notes=notes,
            rows=ensemble.rows(),
            fieldnames=PATH_FIELDS,
            start_time=start,
            end_time=datetime.now(),
        )

    def boundaries(self, ensemble: DiffusionEnsemble, plan: ExperimentPlan) -> ExperimentResult:
        """
        数值 Feller 分类与模拟结果的一致性

        有命中时右端必须可达; 零命中且路径数 ≥ 10⁴ 时右端必须不可达。
        """
        start = datetime.now()
        sim = ensemble.config
        classes = boundary_classification(sim.model, sim.drift, sim.barrier)
        right = classes.right
        hits = ensemble.hit_count
        if hits > 0:
            coherent = right.accessible
        elif sim.paths >= COHERENCE_PATHS:
            coherent = not right.accessible
        else:
            coherent = True
        notes = []
        if hits == 0 and sim.paths < COHERENCE_PATHS:
            notes.append(f"路径数 {sim.paths} < {COHERENCE_PATHS}, 零命中不作为不可达的证据")
        settled = classes.left.settled and right.settled
        if not settled:
            notes.append("积分趋势位于判定阈值之间, 分类不稳定")

        rows = [
            {field: endpoint.to_dict()[field] for field in ENDPOINT_FIELDS}
            for endpoint in (classes.left, right)
        ]
        return ExperimentResult(
            experiment="boundary_classification",
            verdict=Verdict.from_flag(coherent and settled),
            plan=ExperimentPlan(
                manifold=plan.manifold,
                experiment="boundary_classification",
                samples={"epsilons": 3},
                seeds=plan.seeds,
                tolerances={"divergence_ratio": 0.7},
                output_dir=plan.output_dir,
            ),
            measured=classes.to_dict(),
            aggregates={
                "left": classes.left.kind,
                "right": right.kind,
                "right_accessible": right.accessible,
                "observed_hits": hits,
                "coherent": coherent,
            },
            notes=notes,
            rows=rows,
            fieldnames=ENDPOINT_FIELDS,
            start_time=start,
            end_time=datetime.now(),
        )

    def dt_halving(self, ensemble: DiffusionEnsemble, plan: ExperimentPlan, threads) -> ExperimentResult:
        """步长减半: 命中数不变, 终值的均值与方差相对变化 < 2%"""
        start = datetime.now()
        sim = ensemble.config
        halved = simulate_rho(sim.with_(refine=2 * sim.refine), threads=threads)
        coarse, fine = ensemble.moments(), halved.moments()
        changes: Dict[str, float] = {
            "mean": _relative(coarse["mean"], fine["mean"]),
            "variance": _relative(coarse["variance"], fine["variance"]),
        }
        same_hits = ensemble.hit_count == halved.hit_count
        passed = same_hits and all(np.isfinite(v) and v < MOMENT_TOL for v in changes.values())
        logger.info(
            f"dt 减半: 命中 {ensemble.hit_count} → {halved.hit_count}, "
            f"均值变化 {changes['mean']:.3%}, 方差变化 {changes['variance']:.3%}"
        )
        return ExperimentResult(
            experiment="dt_halving",
            verdict=Verdict.from_flag(passed),
            plan=plan,
            aggregates={
                "hits": [ensemble.hit_count, halved.hit_count],
                "terminal": {"dt": coarse, "dt/2": fine},
                "relative_change": changes,
                "fine_steps": [sim.fine_step, halved.config.fine_step],
            },
            rows=[
                {"dt": sim.fine_step, "hits": ensemble.hit_count, **coarse},
                {"dt": halved.config.fine_step, "hits": halved.hit_count, **fine},
            ],
            fieldnames=["dt", "hits", "mean", "variance", "count"],
            start_time=start,
            end_time=datetime.now(),
        )
