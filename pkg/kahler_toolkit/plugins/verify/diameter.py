"""
直径验证插件

diameter: 由采样测得假设常数, 计算对应情形的直径上界, 并用按体积加权的点对估计直径
          (最远的几对再做局部极大化); 成立 ⇔ 估计 ≤ 上界 + 1e-3。
integral_lemmas: 沿种子化的测地线检查梯度引理与 Lie 导数引理。
"""

from datetime import datetime
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from kahler_toolkit.core.errors import KahlerToolkitError, NumericalError
from kahler_toolkit.core.logger import LogContext, get_logger
from kahler_toolkit.geometry.catalog import sample_points
from kahler_toolkit.geometry.comparison import (
    ComparisonModel,
    Flavor,
    diameter_bound,
    gradient_lemma_check,
    lie_lemma_check,
    measure_constants,
)
from kahler_toolkit.geometry.geodesics import alternative_profile, distance, integrate_geodesic
from kahler_toolkit.geometry.manifold import ManifoldKind, ManifoldSpec, ScalarField, VectorField
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
    drift_field,
    manifold_from_config,
    model_from_config,
    pipeline_tolerance,
    potential,
)
from kahler_toolkit.utils.parallel import deterministic_map

logger = get_logger(__name__)

HOLDS_SLACK = 1e-3
MIN_ADMISSIBLE_K = 1e-9
FAILURE_LIMIT = 0.05
CANDIDATE_FACTOR = 4
REFINE_STARTS = 3
CROSSCHECK_PAIRS = 5
CROSSCHECK_FRACTION = 0.8
LEMMA_LENGTH = (0.5, 1.5)
DEFAULT_PHI = "0.5*sin(x1) + 0.3*cos(x2)"

DIAMETER_FIELDS = ["pair", "p", "q", "distance"]
LEMMA_FIELDS = ["case", "lemma", "length", "lhs", "rhs", "C", "holds", "holds_derived", "note"]


def volume_weighted_points(spec: ManifoldSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """先在采样盒内均匀取候选, 再按 √det g 重抽样"""
    candidates = sample_points(spec, rng, CANDIDATE_FACTOR * count)
    weights = np.sqrt(np.linalg.det(spec.metric(candidates)))
    index = rng.choice(len(candidates), size=count, replace=True, p=weights / weights.sum())
    return candidates[index]


def distance_function(spec: ManifoldSpec, seed: int) -> Tuple[str, Callable[[np.ndarray, np.ndarray], float]]:
    """闭式距离优先, 否则打靶"""
    if spec.distance_jet_fn is not None:
        def closed(p: np.ndarray, q: np.ndarray) -> float:
            return float(spec.distance_jet_fn(p, spec.coordinates(q, 0)).v)
        return "closed-form", closed

    def shooting(p: np.ndarray, q: np.ndarray) -> float:
        return distance(spec, p, q, seed=seed).value
    return "shooting", shooting


def _format_point(x: np.ndarray) -> str:
    return ";".join(format(float(c), ".17g") for c in x)


@register_plugin
class DiameterVerifyPlugin(Plugin):
    """直径验证插件"""

    name = "verify_diameter"
    category = PluginCategory.VERIFY
    description = "直径上界与两个积分引理"

    def get_required_params(self) -> List[ParamSpec]:
        return [
            ParamSpec("run.manifold", str, "目录项名称或流形文件"),
            ParamSpec("model.flavor", str, "情形", required=False, default="non_gradient_mZ",
                      choices=["gradient_bounded_phi", "gradient_riccati", "non_gradient_mZ"]),
            ParamSpec("model.k", float, "声明的 k", required=False),
            ParamSpec("model.C", float, "声明的 C", required=False),
            ParamSpec("run.phi", str, "势函数 φ (梯度情形)", required=False),
            ParamSpec("verify.pairs", int, "点对数", required=False, default=200),
            ParamSpec("verify.lemma_cases", int, "引理算例数", required=False, default=4),
        ]

    def run(self, config) -> List[ExperimentResult]:
        spec = manifold_from_config(config)
        with LogContext(experiment="verify diameter", seed=config.seed):
            return [self.diameter(spec, config), self.integral_lemmas(spec, config)]

    # ------------------------------------------------------------------ 假设

    def hypotheses(self, spec: ManifoldSpec, config, points) -> Tuple[Optional[ComparisonModel], Dict, List[str]]:
        """
        实测 k 与 C, 返回 (可用模型或 None, 实测信息, 不适用原因)
        """
        claimed_k, claimed_c = config.get("model.k"), config.get("model.C")
        trial = model_from_config(config, spec, k=claimed_k or 1.0)
        phi = potential(spec, config)
        if trial.flavor is not Flavor.NON_GRADIENT_MZ and phi is None:
            phi = ScalarField.zero(role="phi")
        measured = measure_constants(
            spec,
            trial,
            points,
            reading=config.get("comparison.hypothesis_reading", "proof"),
            z=drift_field(spec, config) if trial.flavor is Flavor.NON_GRADIENT_MZ else None,
            phi=phi,
            base=base_from_config(spec, config),
            directions=int(config.get("verify.directions", 200)),
            seed=config.seed,
            denominator=config.get("numerics.be_denominator", "real-dim"),
        )
        info = {"constants": measured.to_dict(), "flavor": trial.flavor.value}
        reasons = []
        k = measured.k if claimed_k is None else min(claimed_k, measured.k)
        if k <= MIN_ADMISSIBLE_K:
            reasons.append(f"实测可容许 k = {measured.k:.6g} ≤ 0")
        c = 0.0
        if trial.flavor is not Flavor.NON_GRADIENT_MZ:
            known = spec.metadata.get("diameter")
            if known is not None and not np.isfinite(known):
                reasons.append("流形非紧, 采样无法确认 φ 的全局界")
            c = measured.C or 0.0
            if claimed_c is not None:
                if c > claimed_c + 1e-12:
                    reasons.append(f"采样得到的 C = {c:.6g} 超过声明的 {claimed_c:.6g}")
                c = claimed_c
        if reasons:
            return None, info, reasons
        model = trial.with_(k=float(k), C=float(c))
        info["model"] = model.to_dict()
        return model, info, reasons

    # ------------------------------------------------------------------ 直径

    def diameter(self, spec: ManifoldSpec, config) -> ExperimentResult:
        """
        直径实验

        Raises:
            NumericalError: 超过 5% 的点对距离计算失败
        """
        start = datetime.now()
        pairs, seed = int(config.get("verify.pairs", 200)), config.seed
        tol = pipeline_tolerance(config)
        plan = ExperimentPlan(
            manifold=spec.name,
            experiment="diameter",
            samples={"pairs": pairs},
            seeds={"seed": seed},
            tolerances={"holds": HOLDS_SLACK, "crosscheck": tol},
            output_dir=config.output_dir,
        )

        def finish(verdict: Verdict, notes: List[str], **extra) -> ExperimentResult:
            return ExperimentResult(
                experiment="diameter", verdict=verdict, plan=plan, notes=notes,
                fieldnames=DIAMETER_FIELDS, start_time=start, end_time=datetime.now(), **extra,
            )

        if spec.kind is ManifoldKind.RIEMANNIAN:
            return finish(Verdict.NOT_APPLICABLE, [f"{spec.name} 是黎曼流形"])
        if spec.n < 2:
            return finish(Verdict.NOT_APPLICABLE, [f"直径上界要求 n ≥ 2, {spec.name} 的 n = {spec.n}"])

        rng = np.random.default_rng([seed, 5])
        points = volume_weighted_points(spec, rng, 2 * pairs)
        model, info, reasons = self.hypotheses(spec, config, np.vstack([base_from_config(spec, config), points]))
        if model is None:
            logger.info(f"{spec.name} 直径实验不适用: {'; '.join(reasons)}")
            return finish(Verdict.NOT_APPLICABLE, reasons, measured=info)

        bound = diameter_bound(model)
        route, dist = distance_function(spec, seed)

        def pair_distance(idx: int) -> Optional[float]:
            try:
                return dist(points[2 * idx], points[2 * idx + 1])
            except KahlerToolkitError as e:
                logger.debug(f"点对 {idx} 距离失败: {e.message}")
                return None

        values = deterministic_map(pair_distance, range(pairs), threads=config.threads)
        failures = sum(v is None for v in values)
        if failures > FAILURE_LIMIT * pairs:
            raise NumericalError(f"{failures}/{pairs} 个点对距离计算失败 (上限 5%)")

        rows = [
            {"pair": i, "p": _format_point(points[2 * i]), "q": _format_point(points[2 * i + 1]), "distance": v}
            for i, v in enumerate(values) if v is not None
        ]
        sampled = max(row["distance"] for row in rows)
        estimate = sampled
        if route == "closed-form":
            estimate = max(estimate, self._refine(spec, dist, points, rows))
        crosscheck = self._crosscheck(spec, dist, points, values, seed) if route == "closed-form" else None

        holds = estimate <= bound + HOLDS_SLACK
        aggregates = {
            "estimated_diameter": estimate,
            "sampled_maximum": sampled,
            "bound": bound,
            "holds": holds,
            "sharpness_ratio": estimate / bound,
            "distance_route": route,
            "failed_pairs": failures,
        }
        notes = []
        passed = holds
        if crosscheck is not None:
            aggregates["shooting_crosscheck"] = crosscheck
            if crosscheck >= tol:
                passed = False
                notes.append(f"打靶距离与闭式距离相差 {crosscheck:.3e}")
        if not holds:
            notes.append(f"估计直径 {estimate:.6g} 超过上界 {bound:.6g}")
        logger.info(f"{spec.name} 直径: 估计 {estimate:.6g}, 上界 {bound:.6g}, 比值 {estimate / bound:.4f}")
        return finish(Verdict.from_flag(passed), notes, measured=info, aggregates=aggregates, rows=rows)

    def _refine(self, spec: ManifoldSpec, dist, points: np.ndarray, rows: List[Dict]) -> float:
        """从最远的几对出发, 用 Nelder–Mead 对 (p, q) 做局部极大化"""
        d = spec.dimension
        best = sorted(rows, key=lambda row: -row["distance"])[:REFINE_STARTS]

        def objective(z: np.ndarray) -> float:
            p, q = z[:d], z[d:]
            if not (bool(spec.in_domain(p)) and bool(spec.in_domain(q))):
                return 0.0
            try:
                return -dist(p, q)
            except KahlerToolkitError:
                return 0.0

        refined = 0.0
        for row in best:
            i = row["pair"]
            start = np.concatenate([points[2 * i], points[2 * i + 1]])
            result = minimize(objective, start, method="Nelder-Mead",
                              options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 400 * d})
            refined = max(refined, -float(result.fun))
        return refined

    def _crosscheck(self, spec: ManifoldSpec, dist, points: np.ndarray, values, seed: int) -> float:
        """闭式距离与打靶距离在若干点对上的最大偏差"""
        limit = CROSSCHECK_FRACTION * (spec.injectivity_radius_hint or np.inf)
        worst, used = 0.0, 0
        for i, value in enumerate(values):
            if used >= CROSSCHECK_PAIRS:
                break
            if value is None or value >= limit or value < 1e-3:
                continue
            try:
                shot = distance(spec, points[2 * i], points[2 * i + 1], seed=seed).value
            except KahlerToolkitError as exc:
                logger.debug(f"交叉检验跳过点对 {i}: {exc.message}")
                continue
            worst = max(worst, abs(shot - value))
            used += 1
        return worst

    # ------------------------------------------------------------------ 积分引理

    def integral_lemmas(self, spec: ManifoldSpec, config) -> ExperimentResult:
        """
        梯度引理 ∫f² Hess φ(γ̇,γ̇) ≤ 2C√l(∫((ff′)′)²)^{1/2} 与 Lie 引理

        Lie 引理按配置的系数判定, 同时报告系数 4 的结果。
        """
        start = datetime.now()
        cases, seed = int(config.get("verify.lemma_cases", 4)), config.seed
        factor = float(config.get("comparison.lie_lemma_factor", 1.0))
        profile_name = config.get("comparison.alternative_profile", "jacobi")
        plan = ExperimentPlan(
            manifold=spec.name,
            experiment="integral_lemmas",
            samples={"cases": cases},
            seeds={"seed": seed},
            tolerances={"lie_lemma_factor": factor},
            output_dir=config.output_dir,
        )
        if spec.dimension < 2:
            return ExperimentResult("integral_lemmas", Verdict.NOT_APPLICABLE, plan, notes=["维数 < 2"])

        phi = potential(spec, config) or ScalarField.from_text(DEFAULT_PHI, spec.dimension, role="phi")
        field_v = drift_field(spec, config)
        if field_v.is_zero:
            texts = ["0.2*cos(x2)", "0.2*sin(x1)"] + ["0"] * (spec.dimension - 2)
            field_v = VectorField.from_texts(texts, spec.dimension)
        k = config.get("model.k") or 1.0
        rng = np.random.default_rng([seed, 6])
        hint = spec.injectivity_radius_hint
        starts = sample_points(spec, rng, cases)

        rows: List[Dict] = []
        for case, p in enumerate(starts):
            u = rng.standard_normal(spec.dimension)
            u = u / np.sqrt(u @ spec.metric(p) @ u)
            lo, hi = LEMMA_LENGTH
            if hint is not None:
                hi = min(hi, 0.9 * hint)
            length = float(rng.uniform(lo, max(lo, hi)))
            try:
                path = integrate_geodesic(spec, p, u, length)
                profile = alternative_profile(profile_name, k, length)
                checks = [
                    gradient_lemma_check(spec, phi, path, profile, seed=seed + case),
                    lie_lemma_check(spec, field_v, path, profile, factor=factor, seed=seed + case),
                ]
            except KahlerToolkitError as e:
                rows.append({"case": case, "lemma": "-", "length": length, "note": e.message})
                continue
            for check in checks:
                data = check.to_dict()
                rows.append({
                    "case": case,
                    "lemma": check.name,
                    "length": check.length,
                    "lhs": check.lhs,
                    "rhs": check.rhs,
                    "C": check.C,
                    "holds": check.holds,
                    "holds_derived": data.get("holds_derived", check.holds),
                    "note": "",
                })

        checked = [row for row in rows if row["lemma"] != "-"]
        notes = [f"算例 {row['case']}: {row['note']}" for row in rows if row["lemma"] == "-"]
        if not checked:
            return ExperimentResult(
                "integral_lemmas", Verdict.NOT_APPLICABLE, plan, notes=notes or ["没有可用算例"],
                rows=rows, fieldnames=LEMMA_FIELDS, start_time=start, end_time=datetime.now(),
            )
        passed = all(row["holds"] for row in checked)
        aggregates = {
            "cases": cases,
            "checked": len(checked),
            "gradient_holds": all(r["holds"] for r in checked if r["lemma"] == "gradient"),
            "lie_holds": all(r["holds"] for r in checked if r["lemma"] == "lie"),
            "lie_holds_factor_4": all(r["holds_derived"] for r in checked if r["lemma"] == "lie"),
            "lie_lemma_factor": factor,
            "profile": profile_name,
        }
        logger.info(f"{spec.name} 积分引理: {len(checked)} 项检查, {'全部成立' if passed else '存在不成立'}")
        return ExperimentResult(
            experiment="integral_lemmas",
            verdict=Verdict.from_flag(passed),
            plan=plan,
            measured={"phi": phi.label, "V": field_v.label},
            aggregates=aggregates,
            notes=notes,
            rows=rows,
            fieldnames=LEMMA_FIELDS,
            start_time=start,
            end_time=datetime.now(),
        )
