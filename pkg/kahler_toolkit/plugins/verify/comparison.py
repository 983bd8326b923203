"""
Laplace 比较验证插件

laplacian_comparison: 沿一条径向测地线比较 ℒr 与闭式右端, k 取给定值与实测值中的较小者;
comparison_canary: ℂPⁿ 的度量乘以 1 + 0.05·sin(x1) 后, r = 0.6 处的余量必须明显偏离 0;
riccati: 种子化的 (C, α) 上 Riccati ODE 数值解不超过闭式界, 以及 C = 0 时在 π/√k 处爆破。
"""

from datetime import datetime
from typing import Dict, List, Optional, Tuple

import numpy as np

from kahler_toolkit.core.errors import GeometryInputError
from kahler_toolkit.core.logger import LogContext, get_logger
from kahler_toolkit.geometry.catalog import perturb_conformal_text
from kahler_toolkit.geometry.comparison import (
    ComparisonModel,
    ComparisonReport,
    Flavor,
    MeasuredConstants,
    comparison_rhs,
    measure_constants,
    riccati_blowdown,
    riccati_ode_solve,
)
from kahler_toolkit.geometry.geodesics import CUT_FRACTION, exp_map, radial_derivatives
from kahler_toolkit.geometry.manifold import ManifoldKind, ManifoldSpec, VectorField
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
from kahler_toolkit.utils.parallel import deterministic_map

logger = get_logger(__name__)

SWEEP_RANGE = (0.1, 1.4)
SWEEP_FRACTION = 0.9
MIN_ADMISSIBLE_K = 1e-9
CANARY_FACTOR = "1 + 0.05*sin(x1)"
CANARY_RADIUS = 0.6
CANARY_MARGIN = 0.01
RICCATI_C_RANGE = (0.0, 2.0)
RICCATI_ALPHA_RANGE = (0.5, 3.0)
BLOWDOWN_TOL = 1e-3
RICCATI_GRID = 200

SWEEP_FIELDS = ["r", "lhs", "rhs", "margin"]
RICCATI_FIELDS = ["case", "C", "alpha", "min_bound_margin", "blowdown", "predicted_blowdown"]


def sweep_direction(spec: ManifoldSpec, base: np.ndarray, seed: int, direction=None) -> np.ndarray:
    """base 处的单位方向 (未给出时由种子生成)"""
    g = spec.metric(base)
    u = np.random.default_rng([seed, 3]).standard_normal(spec.dimension) if direction is None \
        else np.asarray(direction, dtype=float)
    norm2 = float(u @ g @ u)
    if norm2 == 0.0:
        raise GeometryInputError("方向向量为零")
    return u / np.sqrt(norm2)


def sweep_radii(spec: ManifoldSpec, model: ComparisonModel, count: int) -> np.ndarray:
    """r ∈ [0.1, 1.4], 上端截断到屏障与单射半径提示的 0.9 倍以内"""
    lo, hi = SWEEP_RANGE
    hi = min(hi, SWEEP_FRACTION * model.barrier)
    if spec.injectivity_radius_hint is not None:
        hi = min(hi, SWEEP_FRACTION * CUT_FRACTION * spec.injectivity_radius_hint)
    if hi <= lo:
        raise GeometryInputError(f"比较扫描区间为空: 上端 {hi:.4g} ≤ {lo}")
    return np.linspace(lo, hi, count)


def comparison_sweep(
    spec: ManifoldSpec,
    model: ComparisonModel,
    base: np.ndarray,
    unit: np.ndarray,
    radii,
    z: Optional[VectorField] = None,
    route: str = "jacobi",
    tolerance: float = 1e-4,
    seed: int = 0,
    threads: int = 1,
) -> ComparisonReport:
    """
    沿 exp_base(r·unit) 计算 ℒr = Δr + Zr 与比较右端

    Raises:
        GeometryInputError: r 超出屏障或单射半径
    """
    z = z if z is not None and not z.is_zero else None

    def lhs_at(r: float) -> float:
        x = exp_map(spec, base, r * unit)
        rd = radial_derivatives(spec, base, x, z=z, route=route, seed=seed)
        return rd.laplacian if rd.drift is None else rd.drift

    radii = np.asarray(radii, dtype=float)
    lhs = np.array(deterministic_map(lhs_at, list(radii), threads=threads))
    rhs = np.asarray(comparison_rhs(model, radii), dtype=float)
    return ComparisonReport(r=radii, lhs=lhs, rhs=rhs, tolerance=tolerance)


def _is_complex_projective(spec: ManifoldSpec) -> bool:
    return spec.kind is ManifoldKind.KAHLER and spec.name.startswith("cp") and spec.name[2:].isdigit()


@register_plugin
class ComparisonVerifyPlugin(Plugin):
    """Laplace 比较验证插件"""

    name = "verify_comparison"
    category = PluginCategory.VERIFY
    description = "Laplace 比较扫描、扰动金丝雀与 Riccati 比较"

    def get_required_params(self) -> List[ParamSpec]:
        return [
            ParamSpec("run.manifold", str, "目录项名称或流形文件"),
            ParamSpec("model.k", float, "声明的曲率下界 k (缺省取实测值)", required=False),
            ParamSpec("model.m", float, "Bakry–Émery 参数 m", required=False),
            ParamSpec("run.z", list, "向量场 Z", required=False),
            ParamSpec("run.direction", list, "扫描方向", required=False),
            ParamSpec("verify.radii", int, "r 网格点数", required=False, default=20),
            ParamSpec("verify.directions", int, "每点采样方向数", required=False, default=200),
            ParamSpec("verify.lemma_cases", int, "Riccati 种子化算例数", required=False, default=4),
        ]

    def run(self, config) -> List[ExperimentResult]:
        spec = manifold_from_config(config)
        with LogContext(experiment="verify comparison", seed=config.seed):
            results = [self.laplacian_comparison(spec, config)]
            if _is_complex_projective(spec):
                results.append(self.canary(spec, config))
            results.append(self.riccati(spec, config))
        return results

    # ------------------------------------------------------------------ 比较扫描

    def measured_model(self, spec: ManifoldSpec, config, points) -> Tuple[ComparisonModel, MeasuredConstants]:
        """实测 k, 与声明的 k 取小"""
        claimed = config.get("model.k")
        trial = model_from_config(config, spec, k=claimed or 1.0).with_(flavor=Flavor.NON_GRADIENT_MZ)
        measured = measure_constants(
            spec,
            trial,
            points,
            reading=config.get("comparison.hypothesis_reading", "proof"),
            z=drift_field(spec, config),
            directions=int(config.get("verify.directions", 200)),
            seed=config.seed,
            denominator=config.get("numerics.be_denominator", "real-dim"),
        )
        k = measured.k if claimed is None else min(claimed, measured.k)
        if k > MIN_ADMISSIBLE_K:
            trial = trial.with_(k=float(k))
        return trial, measured

    def laplacian_comparison(self, spec: ManifoldSpec, config) -> ExperimentResult:
        """
        ℒr ≤ 右端 (凯勒: (m−2)𝔰′(k)/𝔰(k) + 𝔰′(4k)/𝔰(4k))

        假设常数由采样测得; 可容许的 k 不为正时判定为 NOT-APPLICABLE。
        """
        start = datetime.now()
        tol = pipeline_tolerance(config)
        count = int(config.get("verify.radii", 20))
        plan = ExperimentPlan(
            manifold=spec.name,
            experiment="laplacian_comparison",
            samples={"radii": count, "directions": int(config.get("verify.directions", 200))},
            seeds={"seed": config.seed},
            tolerances={"margin": tol},
            output_dir=config.output_dir,
        )

        def finish(verdict: Verdict, notes: List[str], **extra) -> ExperimentResult:
            return ExperimentResult(
                experiment="laplacian_comparison", verdict=verdict, plan=plan, notes=notes,
                fieldnames=SWEEP_FIELDS, start_time=start, end_time=datetime.now(), **extra,
            )

        if spec.kind is ManifoldKind.RIEMANNIAN:
            return finish(Verdict.NOT_APPLICABLE, [f"{spec.name} 是黎曼流形, 没有正交Ricci曲率"])

        base = base_from_config(spec, config)
        unit = sweep_direction(spec, base, config.seed, config_vector(spec, config, "direction"))
        initial = model_from_config(config, spec, k=config.get("model.k") or 1.0)
        radii = sweep_radii(spec, initial, count)
        points = np.vstack([base] + [exp_map(spec, base, r * unit) for r in radii])
        model, measured = self.measured_model(spec, config, points)
        info = {"constants": measured.to_dict(), "model": model.to_dict(), "barriers": model.barriers()}

        if measured.k <= MIN_ADMISSIBLE_K:
            return finish(
                Verdict.NOT_APPLICABLE,
                [f"实测可容许 k = {measured.k:.6g} ≤ 0, 比较假设不成立"],
                measured=info,
            )

        radii = radii[radii < SWEEP_FRACTION * model.barrier]
        if radii.size == 0:
            return finish(Verdict.NOT_APPLICABLE, [f"实测 k = {model.k:.6g} 的屏障之内没有扫描半径"], measured=info)
        report = comparison_sweep(
            spec, model, base, unit, radii,
            z=drift_field(spec, config),
            route=config.get("numerics.radial_route", "jacobi"),
            tolerance=tol,
            seed=config.seed,
            threads=config.threads,
        )
        notes = []
        if measured.vacuous:
            notes.append("Ric⊥ 假设系数为零 (vacuous), 只有结构曲率项起作用")
        if report.equality:
            notes.append("在容差内取等 (等号情形)")
        logger.info(f"{spec.name} 比较扫描: 最差余量 {report.worst_margin:.3e}, k = {model.k:.6g}")
        aggregates = {
            "k_used": model.k,
            "worst_margin": report.worst_margin,
            "equality": report.equality,
            "holds": report.holds,
            "radii": len(report.r),
        }
        return finish(
            Verdict.from_flag(report.holds), notes, measured=info, aggregates=aggregates, rows=report.rows()
        )

    # ------------------------------------------------------------------ 金丝雀

    def canary(self, spec: ManifoldSpec, config) -> ExperimentResult:
        """扰动度量后比较余量应明显偏离 0, 否则说明流水线对度量不敏感"""
        start = datetime.now()
        tol = pipeline_tolerance(config)
        plan = ExperimentPlan(
            manifold=spec.name,
            experiment="comparison_canary",
            seeds={"seed": config.seed},
            tolerances={"margin": CANARY_MARGIN},
            output_dir=config.output_dir,
        )
        perturbed = perturb_conformal_text(spec, CANARY_FACTOR)
        base = base_from_config(spec, config)
        unit = np.zeros(spec.dimension)
        unit[0] = 1.0
        model = model_from_config(config, spec, k=1.0).with_(flavor=Flavor.NON_GRADIENT_MZ)
        original = comparison_sweep(
            spec, model, base, sweep_direction(spec, base, config.seed, unit), [CANARY_RADIUS],
            tolerance=tol, seed=config.seed,
        )
        disturbed = comparison_sweep(
            perturbed, model, base, sweep_direction(perturbed, base, config.seed, unit), [CANARY_RADIUS],
            tolerance=tol, seed=config.seed,
        )
        margin = float(disturbed.margin[0])
        detected = abs(margin) > CANARY_MARGIN
        aggregates = {
            "factor": CANARY_FACTOR,
            "r": CANARY_RADIUS,
            "original_margin": float(original.margin[0]),
            "perturbed_margin": margin,
            "positive": margin > 0,
            "detected": detected,
        }
        notes = [] if detected else [f"扰动后余量 {margin:.3e} 仍接近 0, 流水线对度量扰动不敏感"]
        if margin <= 0:
            notes.append(f"扰动后余量为负 ({margin:.4g}), 与预期的正号相反; 判定按 |余量|")
        logger.info(f"{spec.name} 金丝雀: 扰动余量 {margin:.4g}")
        rows = [
            {"r": CANARY_RADIUS, "lhs": float(report.lhs[0]), "rhs": float(report.rhs[0]),
             "margin": float(report.margin[0]), "metric": label}
            for label, report in (("original", original), ("perturbed", disturbed))
        ]
        return ExperimentResult(
            experiment="comparison_canary",
            verdict=Verdict.from_flag(detected),
            plan=plan,
            aggregates=aggregates,
            notes=notes,
            rows=rows,
            fieldnames=SWEEP_FIELDS + ["metric"],
            start_time=start,
            end_time=datetime.now(),
        )

    # ------------------------------------------------------------------ Riccati

    def riccati(self, spec: Optional[ManifoldSpec], config) -> ExperimentResult:
        """数值解 ≤ 闭式界, 爆破点不晚于预测值; C = 0, α = 0 时爆破于 π/√k"""
        start = datetime.now()
        cases = int(config.get("verify.lemma_cases", 4))
        tol = pipeline_tolerance(config)
        plan = ExperimentPlan(
            manifold=spec.name if spec else None,
            experiment="riccati_comparison",
            samples={"cases": cases},
            seeds={"seed": config.seed},
            tolerances={"margin": tol, "blowdown": BLOWDOWN_TOL},
            output_dir=config.output_dir,
        )
        try:
            model = model_from_config(config, spec, k=config.get("model.k") or 1.0)
        except GeometryInputError as e:
            return ExperimentResult("riccati_comparison", Verdict.NOT_APPLICABLE, plan, notes=[e.message])
        model = model.with_(flavor=Flavor.GRADIENT_RICCATI)
        if model.n < 2:
            return ExperimentResult(
                "riccati_comparison", Verdict.NOT_APPLICABLE, plan,
                notes=[f"Riccati 比较要求 n ≥ 2, 实际 n = {model.n}"],
            )

        rng = np.random.default_rng([config.seed, 4])
        params = [(0.0, 0.0)] + [
            (float(rng.uniform(*RICCATI_C_RANGE)), float(rng.uniform(*RICCATI_ALPHA_RANGE)))
            for _ in range(cases)
        ]
        rows: List[Dict] = []
        passed = True
        for idx, (c, alpha) in enumerate(params):
            case_model = model.with_(C=c, alpha=alpha)
            solution = riccati_ode_solve(case_model, alpha)
            predicted = riccati_blowdown(case_model, alpha)
            upper = SWEEP_FRACTION * min(solution.r_end, predicted)
            grid = np.linspace(10.0 * solution.r_start, upper, RICCATI_GRID)
            worst = float(np.min(solution.bound_margin(grid)))
            blow = solution.blowdown
            ok = worst >= -tol and blow is not None and blow <= predicted + BLOWDOWN_TOL
            if idx == 0:
                # C = 0, α = 0: 爆破点即 π/√k
                ok = ok and abs(blow - np.pi / np.sqrt(model.k)) < BLOWDOWN_TOL
            passed = passed and ok
            rows.append({
                "case": idx,
                "C": c,
                "alpha": alpha,
                "min_bound_margin": worst,
                "blowdown": blow,
                "predicted_blowdown": predicted,
            })
        logger.info(f"Riccati 比较 {len(rows)} 个算例, {'全部通过' if passed else '存在失败'}")
        return ExperimentResult(
            experiment="riccati_comparison",
            verdict=Verdict.from_flag(passed),
            plan=plan,
            measured={"model": model.to_dict()},
            aggregates={
                "cases": len(rows),
                "min_bound_margin": min(r["min_bound_margin"] for r in rows),
                "zero_c_blowdown": rows[0]["blowdown"],
                "expected_zero_c_blowdown": float(np.pi / np.sqrt(model.k)),
            },
            rows=rows,
            fieldnames=RICCATI_FIELDS,
            start_time=start,
            end_time=datetime.now(),
        )
