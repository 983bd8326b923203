"""
坐标卡扩散模拟插件

生成元 Δ + Z 的扩散在坐标卡中的 Euler–Maruyama 模拟, 记录径向过程 d_p(X_t)。
判定按流形而定:
- 平坦且 Z = 0: 终时刻 E|X_t − X_0|² 与 2·d·t 的相对偏差 < 5%
- 已知直径: 径向过程不超过直径 + 1e-3
- 给出 Z 的凯勒/四元流形: 实测 k′ 后, 径向过程不超过 π/(2√k′) + 1e-3
"""

import math
from datetime import datetime
from typing import Dict, List, Optional

import numpy as np

from kahler_toolkit.core.logger import LogContext, get_logger
from kahler_toolkit.geometry.catalog import sample_points
from kahler_toolkit.geometry.comparison import Flavor, measure_constants
from kahler_toolkit.geometry.geodesics import exp_map
from kahler_toolkit.geometry.manifold import ManifoldKind, ManifoldSpec, VectorField
from kahler_toolkit.geometry.stochastic import ManifoldEnsemble, manifold_diffusion
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
)
from kahler_toolkit.plugins.verify.comparison import MIN_ADMISSIBLE_K

logger = get_logger(__name__)

DEFAULT_MANIFOLD = "cp2"
DEFAULT_START_RADIUS = 0.5
MSD_TOL = 0.05
CEILING_TOL = 1e-3
FIELDS = ["path_id", "flagged", "exit_time", "max_radial", "terminal_radial"]


def start_point(spec: ManifoldSpec, config, base: np.ndarray) -> np.ndarray:
    """run.point, 缺省为沿第一坐标方向距基点 0.5 的点"""
    q = config_vector(spec, config, "point")
    if q is not None:
        return q
    e1 = np.zeros(spec.dimension)
    e1[0] = 1.0
    g = spec.metric(base)
    return exp_map(spec, base, DEFAULT_START_RADIUS * e1 / math.sqrt(e1 @ g @ e1))


def drift_ceiling(spec: ManifoldSpec, config, z: VectorField) -> Dict:
    """
    由实测 k′ 得到的径向上界 π/(2√k′)

    m 必须大于实维数 (Z ≠ 0); 可容许的 k′ 不为正时没有上界。
    """
    model = model_from_config(config, spec, k=1.0).with_(flavor=Flavor.NON_GRADIENT_MZ)
    points = sample_points(spec, np.random.default_rng([config.seed, 8]), int(config.get("verify.samples", 20)))
    measured = measure_constants(
        spec,
        model,
        points,
        reading=config.get("comparison.hypothesis_reading", "proof"),
        z=z,
        directions=int(config.get("verify.directions", 200)),
        seed=config.seed,
        denominator=config.get("numerics.be_denominator", "real-dim"),
    )
    info: Dict = {"measured": measured.to_dict(), "ceiling": None}
    if measured.k > MIN_ADMISSIBLE_K:
        info["ceiling"] = math.pi / (2.0 * math.sqrt(measured.k))
    return info


@register_plugin
class ManifoldSimulatePlugin(Plugin):
    """坐标卡扩散模拟插件"""

    name = "simulate_manifold"
    category = PluginCategory.SIMULATE
    description = "生成元 Δ + Z 的坐标卡扩散与径向过程"

    def get_required_params(self) -> List[ParamSpec]:
        return [
            ParamSpec("run.manifold", str, "目录项名称或流形文件", required=False, default=DEFAULT_MANIFOLD),
            ParamSpec("run.point", list, "起点 q", required=False),
            ParamSpec("run.z", list, "漂移场 Z 的分量表达式", required=False),
            ParamSpec("stochastic.manifold_T", float, "时间区间", required=False, default=5.0),
            ParamSpec("stochastic.manifold_paths", int, "路径数", required=False, default=1000),
        ]

    def run(self, config) -> List[ExperimentResult]:
        spec = manifold_from_config(config, default=DEFAULT_MANIFOLD)
        base = base_from_config(spec, config)
        q = start_point(spec, config, base)
        z = drift_field(spec, config)
        T = float(config.get("stochastic.manifold_T", 5.0))
        paths = int(config.get("stochastic.manifold_paths", 1000))
        dt = float(config.get("stochastic.manifold_dt", 1e-3))
        decimation = int(config.get("stochastic.decimation", 100))
        plan = ExperimentPlan(
            manifold=spec.name,
            experiment="manifold_diffusion",
            samples={"paths": paths, "decimation": decimation},
            seeds={"seed": config.seed},
            tolerances={"msd": MSD_TOL, "ceiling": CEILING_TOL},
            output_dir=config.output_dir,
        )

        with LogContext(experiment="simulate manifold", seed=config.seed):
            start = datetime.now()
            ensemble = manifold_diffusion(
                spec, z, q, T, paths,
                seed=config.seed,
                dt=dt,
                decimation=decimation,
                base=base,
                threads=config.threads,
                block_size=int(config.get("stochastic.block_size", 256)),
            )
            verdict, measured, checks, notes = self.judge(spec, config, ensemble, z)

        aggregates = ensemble.summary()
        aggregates["start"] = [float(c) for c in q]
        aggregates["checks"] = checks
        return [
            ExperimentResult(
                experiment="manifold_diffusion",
                verdict=verdict,
                plan=plan,
                measured=measured,
                aggregates=aggregates,
                notes=notes,
                rows=ensemble.rows(),
                fieldnames=FIELDS,
                start_time=start,
                end_time=datetime.now(),
            )
        ]

    def judge(self, spec: ManifoldSpec, config, ensemble: ManifoldEnsemble, z: Optional[VectorField]):
        checks: Dict[str, Dict] = {}
        measured: Dict = {}
        notes: List[str] = []
        diameter = spec.metadata.get("diameter")
        flat = spec.metadata.get("einstein") == 0.0 and diameter is not None and not np.isfinite(diameter)

        if flat and z.is_zero:
            t = float(ensemble.times[-1])
            expected = 2.0 * spec.dimension * t
            observed = float(ensemble.mean_square_displacement()[-1])
            error = abs(observed - expected) / expected
            checks["mean_square_displacement"] = {
                "t": t, "observed": observed, "expected": expected,
                "relative_error": error, "passed": error < MSD_TOL,
            }

        if diameter is not None and np.isfinite(diameter):
            checks["diameter_ceiling"] = {
                "ceiling": float(diameter), "max_radial": ensemble.max_radial,
                "passed": ensemble.max_radial <= diameter + CEILING_TOL,
            }

        if not z.is_zero and spec.kind is not ManifoldKind.RIEMANNIAN:
            info = drift_ceiling(spec, config, z)
            measured["constants"] = info["measured"]
            if info["ceiling"] is None:
                notes.append("Z 下可容许的 k′ 不为正, 没有径向上界")
            else:
                checks["drift_ceiling"] = {
                    "ceiling": info["ceiling"], "max_radial": ensemble.max_radial,
                    "passed": ensemble.max_radial <= info["ceiling"] + CEILING_TOL,
                }

        notes.append(f"径向过程每 {ensemble.decimation} 步记录一次, 最大值只在记录时刻取得")
        if not checks:
            notes.append(f"{spec.name} 没有可比较的已知量, 只报告统计")
            return Verdict.NOT_APPLICABLE, measured, checks, notes
        passed = all(c["passed"] for c in checks.values())
        if not passed:
            logger.warning(f"{spec.name} 扩散检查未通过: {[k for k, c in checks.items() if not c['passed']]}")
        return Verdict.from_flag(passed), measured, checks, notes
