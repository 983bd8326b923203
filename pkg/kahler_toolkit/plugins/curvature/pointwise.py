"""
逐点曲率插件

在给定点 (缺省为基点) 计算 Γ, R, Ric, 标量曲率; 给出方向时计算方向量,
包括两条路线的 Ric⊥ 以及可选的 Bakry–Émery 修正。
"""

from datetime import datetime
from typing import List

from kahler_toolkit.core.logger import get_logger
from kahler_toolkit.geometry.calculus import curvature_report
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
    jet_tolerance,
    manifold_from_config,
    potential,
)

logger = get_logger(__name__)


@register_plugin
class CurvaturePlugin(Plugin):
    """逐点曲率插件"""

    name = "curvature"
    category = PluginCategory.CURVATURE
    description = "一点处的曲率张量与方向曲率"

    def get_required_params(self) -> List[ParamSpec]:
        return [
            ParamSpec("run.manifold", str, "目录项名称或流形文件"),
            ParamSpec("run.point", list, "坐标点 (缺省为基点)", required=False),
            ParamSpec("run.direction", list, "单位方向", required=False),
            ParamSpec("run.phi", str, "势函数 φ", required=False),
            ParamSpec("model.m", float, "Bakry–Émery 参数 m", required=False),
            ParamSpec("run.z", list, "向量场 Z 的分量", required=False),
        ]

    def run(self, config) -> List[ExperimentResult]:
        start = datetime.now()
        spec = manifold_from_config(config)
        point = config_vector(spec, config, "point")
        if point is None:
            point = base_from_config(spec, config)
        direction = config_vector(spec, config, "direction")
        tol = jet_tolerance(config)

        z = drift_field(spec, config)
        m = config.get("model.m")
        report = curvature_report(
            spec,
            point,
            direction,
            phi=potential(spec, config),
            m=m,
            z=z,
            denominator=config.get("numerics.be_denominator", "real-dim"),
        )
        logger.info(f"{spec.name} 曲率查询完成 | 点 {point.tolist()}")

        verdict = Verdict.PASS
        notes = []
        if report.orthogonal_ricci is not None and report.orthogonal_ricci.difference >= tol:
            verdict = Verdict.FAIL
            notes.append(f"Ric⊥ 两条路线相差 {report.orthogonal_ricci.difference:.3e}")

        plan = ExperimentPlan(
            manifold=spec.name,
            experiment="curvature",
            tolerances={"jet": tol},
            output_dir=config.output_dir,
        )
        rows = [{"quantity": key, "value": value} for key, value in report.summary_rows().items()]
        return [
            ExperimentResult(
                experiment="curvature",
                verdict=verdict,
                plan=plan,
                measured=report.to_dict(),
                aggregates=report.summary_rows(),
                notes=notes,
                rows=rows,
                fieldnames=["quantity", "value"],
                start_time=start,
                end_time=datetime.now(),
            )
        ]
