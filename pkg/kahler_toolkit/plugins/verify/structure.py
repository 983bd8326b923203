"""
结构与曲率恒等式验证插件

在坐标卡内的采样点上检查:
- 结构张量的代数关系、与度量的相容性、平行性
- 黎曼张量的对称性与第一 Bianchi 恒等式
- 凯勒: R(JX, JY, Z, W) = R(X, Y, Z, W)
- Ric⊥ 的分解路线与标架路线一致
- 目录项已知的 Einstein 常数与 H/Q 常数
- 带厄米数据的凯勒目录项: Chern 曲率字典
"""

from datetime import datetime
from typing import Dict, List

import numpy as np

from kahler_toolkit.core.logger import LogContext, get_logger
from kahler_toolkit.geometry.catalog import sample_points
from kahler_toolkit.geometry.curvature import (
    chern_dictionary_residual,
    einstein_residual,
    iter_point_geometry,
    j_invariance_residual,
    orthogonal_ricci,
    random_unit_vector,
    riemann_identity_residuals,
    structure_check,
    structure_sectional_residual,
)
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
from kahler_toolkit.plugins.inputs import jet_tolerance, manifold_from_config

logger = get_logger(__name__)

CONSTANT_TOL = 1e-7
FIELDS = ["check", "max_residual", "tolerance", "passed"]


def _row(check: str, residual: float, tolerance: float) -> Dict:
    return {"check": check, "max_residual": float(residual), "tolerance": tolerance,
            "passed": bool(residual < tolerance)}


def structure_rows(spec: ManifoldSpec, samples: int, seed: int, jet_tol: float) -> List[Dict]:
    """全部检查项, 每项一行"""
    rows: List[Dict] = []
    riemannian = spec.kind is ManifoldKind.RIEMANNIAN

    if not riemannian:
        report = structure_check(spec, sample_count=samples, seed=seed)
        rows.append(_row("structure_algebraic", report.algebraic, report.algebraic_tol))
        rows.append(_row("structure_compatibility", report.compatibility, report.algebraic_tol))
        rows.append(_row("structure_parallelism", report.parallelism, report.parallel_tol))

    rng = np.random.default_rng([seed, 7])
    points = sample_points(spec, rng, samples)
    geometries = iter_point_geometry(spec, points)

    identities: Dict[str, float] = {}
    for geo in geometries:
        for name, value in riemann_identity_residuals(geo.riemann).items():
            identities[name] = max(identities.get(name, 0.0), value)
    rows.extend(_row(f"riemann_{name}", value, jet_tol) for name, value in identities.items())

    if spec.kind is ManifoldKind.KAHLER:
        worst = max(j_invariance_residual(spec, p, geo) for p, geo in zip(points, geometries))
        rows.append(_row("j_invariance", worst, jet_tol))

    if not riemannian:
        worst = 0.0
        for p, geo in zip(points, geometries):
            v = random_unit_vector(geo.g, rng)
            worst = max(worst, orthogonal_ricci(spec, p, v, geometry=geo).difference)
        rows.append(_row("orthogonal_ricci_routes", worst, jet_tol))

    einstein = spec.metadata.get("einstein")
    if einstein is not None:
        rows.append(_row("einstein_constant", einstein_residual(spec, points, einstein), CONSTANT_TOL))

    constant = spec.metadata.get("structure_constant")
    if constant is not None and not riemannian:
        residual = structure_sectional_residual(spec, points, constant, rng)
        rows.append(_row("structure_sectional_constant", residual, CONSTANT_TOL))

    if spec.kind is ManifoldKind.KAHLER and spec.hermitian_fn is not None:
        worst = max(chern_dictionary_residual(spec, p) for p in points)
        rows.append(_row("chern_dictionary", worst, jet_tol))

    return rows


@register_plugin
class StructureVerifyPlugin(Plugin):
    """结构与曲率恒等式验证插件"""

    name = "verify_structure"
    category = PluginCategory.VERIFY
    description = "结构张量、曲率恒等式与目录项常数检查"

    def get_required_params(self) -> List[ParamSpec]:
        return [
            ParamSpec("run.manifold", str, "目录项名称或流形文件"),
            ParamSpec("verify.samples", int, "采样点数", required=False, default=20),
        ]

    def run(self, config) -> List[ExperimentResult]:
        spec = manifold_from_config(config)
        samples = int(config.get("verify.samples", 20))
        jet_tol = jet_tolerance(config)
        start = datetime.now()
        plan = ExperimentPlan(
            manifold=spec.name,
            experiment="structure",
            samples={"points": samples},
            seeds={"seed": config.seed},
            tolerances={"jet": jet_tol, "constants": CONSTANT_TOL},
            output_dir=config.output_dir,
        )
        with LogContext(experiment="verify structure", seed=config.seed):
            rows = structure_rows(spec, samples, config.seed, jet_tol)
            failed = [row["check"] for row in rows if not row["passed"]]
            if failed:
                logger.warning(f"{spec.name} 未通过的检查: {', '.join(failed)}")
            else:
                logger.info(f"{spec.name} 全部 {len(rows)} 项检查通过")

        return [
            ExperimentResult(
                experiment="structure",
                verdict=Verdict.from_flag(not failed),
                plan=plan,
                aggregates={
                    "checks": len(rows),
                    "failed": failed,
                    "max_residual": max(row["max_residual"] for row in rows),
                },
                rows=rows,
                fieldnames=FIELDS,
                start_time=start,
                end_time=datetime.now(),
            )
        ]
