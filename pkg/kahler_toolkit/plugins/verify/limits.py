"""
小 r 极限验证插件

r·Δ⊥r → 2n−2 (四元 4n−4; 黎曼流形取 r·Δr → d−1), rhs·r → m−1, 两者都用 Richardson 外推;
另沿若干方向求第一个共轭点, 对单射半径等于直径的紧对称目录项与已知值比较。
"""

from datetime import datetime
from typing import Dict, List

import numpy as np

from kahler_toolkit.core.logger import LogContext, get_logger
from kahler_toolkit.geometry.comparison import comparison_rhs
from kahler_toolkit.geometry.geodesics import exp_map, first_conjugate_time, radial_derivatives
from kahler_toolkit.geometry.manifold import ManifoldKind, ManifoldSpec
from kahler_toolkit.plugins.base import (
    ExperimentPlan,
    ExperimentResult,
    ParamSpec,
    Plugin,
    PluginCategory,
    Verdict,
    register_plugin,
)
from kahler_toolkit.plugins.inputs import base_from_config, manifold_from_config, model_from_config
from kahler_toolkit.plugins.verify.comparison import sweep_direction

logger = get_logger(__name__)

LIMIT_RADII = (0.2, 0.1, 0.05, 0.025)
LIMIT_TOL = 1e-3
RHS_RADII = (1e-2, 5e-3)
RHS_TOL = 1e-6
CONJUGATE_TOL = 1e-3
CONJUGATE_DIRECTIONS = 3
FLAT_HORIZON = 2.0 * np.pi

LIMIT_FIELDS = ["quantity", "r", "value", "extrapolated", "target"]
CONJUGATE_FIELDS = ["direction", "conjugate_time", "expected"]


def richardson(values, ratio: float = 2.0, power: int = 2) -> float:
    """误差为 r^power 级时, 相邻两层的外推 (取最细两层)"""
    coarse, fine = float(values[-2]), float(values[-1])
    factor = ratio**power
    return (factor * fine - coarse) / (factor - 1.0)


def _free_dimension(spec: ManifoldSpec) -> int:
    if spec.kind is ManifoldKind.RIEMANNIAN:
        return spec.dimension - 1
    return spec.dimension - spec.structure_rank


@register_plugin
class LimitsVerifyPlugin(Plugin):
    """小 r 极限验证插件"""

    name = "verify_limits"
    category = PluginCategory.VERIFY
    description = "r·Δ⊥r 与 rhs·r 的小 r 极限, 第一个共轭点"

    def get_required_params(self) -> List[ParamSpec]:
        return [
            ParamSpec("run.manifold", str, "目录项名称或流形文件"),
            ParamSpec("model.m", float, "比较模型的 m", required=False),
            ParamSpec("numerics.radial_route", str, "径向导数路线", required=False, default="jacobi"),
        ]

    def run(self, config) -> List[ExperimentResult]:
        spec = manifold_from_config(config)
        with LogContext(experiment="verify limits", seed=config.seed):
            return [self.small_r_limits(spec, config), self.conjugate_times(spec, config)]

    def small_r_limits(self, spec: ManifoldSpec, config) -> ExperimentResult:
        start = datetime.now()
        plan = ExperimentPlan(
            manifold=spec.name,
            experiment="small_r_limits",
            samples={"radii": len(LIMIT_RADII)},
            seeds={"seed": config.seed},
            tolerances={"laplacian": LIMIT_TOL, "rhs": RHS_TOL},
            output_dir=config.output_dir,
        )
        base = base_from_config(spec, config)
        unit = sweep_direction(spec, base, config.seed)
        route = config.get("numerics.radial_route", "jacobi")
        riemannian = spec.kind is ManifoldKind.RIEMANNIAN
        target = float(_free_dimension(spec))
        label = "r*laplacian" if riemannian else "r*orthogonal_laplacian"

        values = []
        for r in LIMIT_RADII:
            rd = radial_derivatives(spec, base, exp_map(spec, base, r * unit), route=route, seed=config.seed)
            values.append(r * (rd.laplacian if riemannian else rd.orthogonal_laplacian))
        extrapolated = richardson(values)
        rows: List[Dict] = [
            {"quantity": label, "r": r, "value": v, "extrapolated": extrapolated, "target": target}
            for r, v in zip(LIMIT_RADII, values)
        ]
        passed = abs(extrapolated - target) < LIMIT_TOL
        aggregates: Dict = {f"{label}_limit": extrapolated, f"{label}_target": target}

        if not riemannian:
            model = model_from_config(config, spec)
            scaled = [r * comparison_rhs(model, r) for r in RHS_RADII]
            rhs_limit = richardson(scaled)
            rows.extend(
                {"quantity": "r*rhs", "r": r, "value": v, "extrapolated": rhs_limit, "target": model.m - 1.0}
                for r, v in zip(RHS_RADII, scaled)
            )
            aggregates["r*rhs_limit"] = rhs_limit
            aggregates["r*rhs_target"] = model.m - 1.0
            passed = passed and abs(rhs_limit - (model.m - 1.0)) < RHS_TOL

        logger.info(f"{spec.name} 小 r 极限: {label} → {extrapolated:.6f} (目标 {target:g})")
        return ExperimentResult(
            experiment="small_r_limits",
            verdict=Verdict.from_flag(passed),
            plan=plan,
            aggregates=aggregates,
            rows=rows,
            fieldnames=LIMIT_FIELDS,
            start_time=start,
            end_time=datetime.now(),
        )

    def conjugate_times(self, spec: ManifoldSpec, config) -> ExperimentResult:
        """
        第一个共轭点

        单射半径提示等于已知直径的目录项 (ℂPⁿ, ℍPⁿ, S²(½)) 共轭点应出现在该值; 平坦空间没有共轭点。
        """
        start = datetime.now()
        plan = ExperimentPlan(
            manifold=spec.name,
            experiment="first_conjugate_time",
            samples={"directions": CONJUGATE_DIRECTIONS},
            seeds={"seed": config.seed},
            tolerances={"conjugate_time": CONJUGATE_TOL},
            output_dir=config.output_dir,
        )
        hint = spec.injectivity_radius_hint
        diameter = spec.metadata.get("diameter")
        expected = None
        if hint is not None and diameter is not None and abs(diameter - hint) < 1e-12:
            expected = float(hint)
        flat = diameter is not None and not np.isfinite(diameter)
        if spec.kind is ManifoldKind.RIEMANNIAN and not flat:
            return ExperimentResult(
                "first_conjugate_time", Verdict.NOT_APPLICABLE, plan,
                notes=[f"{spec.name} 的坐标卡不包含完整测地线"],
            )

        horizon = 1.2 * hint if hint is not None else FLAT_HORIZON
        base = base_from_config(spec, config)
        rows = []
        passed = True
        for idx in range(CONJUGATE_DIRECTIONS):
            unit = sweep_direction(spec, base, config.seed + idx)
            t = first_conjugate_time(spec, base, unit, horizon)
            if flat:
                ok = t is None
            elif expected is not None:
                ok = t is not None and abs(t - expected) < CONJUGATE_TOL
            else:
                ok = True
            passed = passed and ok
            rows.append({"direction": idx, "conjugate_time": t, "expected": expected})

        notes = [] if expected is not None or flat else ["没有已知的共轭点位置, 只报告数值"]
        return ExperimentResult(
            experiment="first_conjugate_time",
            verdict=Verdict.from_flag(passed),
            plan=plan,
            aggregates={"expected": expected, "horizon": horizon,
                        "times": [row["conjugate_time"] for row in rows]},
            notes=notes,
            rows=rows,
            fieldnames=CONJUGATE_FIELDS,
            start_time=start,
            end_time=datetime.now(),
        )
