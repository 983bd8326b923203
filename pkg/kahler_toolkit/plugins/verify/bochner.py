"""
Bochner 公式验证插件

bochner_residual: 凯勒或四元凯勒的修正 Bochner 公式残差 (两种标架构造各报一次, 只对总残差判定);
modified_bochner: f = r 时的修正 Bochner 不等式, 并与 Jacobi 路线的 Δ⊥r 交叉核对。

测试函数: run.f 给出表达式时按点缩放到 |∇f(q)| = 1; "r" 取到基点的闭式距离;
缺省时平坦空间用次数 ≤ 3 的随机多项式, 其余有闭式距离的目录项用 r。
"""

from datetime import datetime
from itertools import combinations_with_replacement
from typing import Dict, List, Optional, Tuple

import numpy as np

from kahler_toolkit.core.errors import GeometryInputError
from kahler_toolkit.core.logger import LogContext, get_logger
from kahler_toolkit.geometry.bochner import (
    BochnerTerms,
    bochner_terms,
    bochner_terms_two_frames,
    modified_bochner_margin,
)
from kahler_toolkit.geometry.catalog import base_point, sample_points, validate_catalog_entry
from kahler_toolkit.geometry.geodesics import CUT_FRACTION, radial_derivatives_many
from kahler_toolkit.geometry.manifold import ManifoldKind, ManifoldSpec, ScalarField
from kahler_toolkit.plugins.base import (
    ExperimentPlan,
    ExperimentResult,
    ParamSpec,
    Plugin,
    PluginCategory,
    ResidualReport,
    Verdict,
    register_plugin,
)
from kahler_toolkit.plugins.inputs import (
    jet_tolerance,
    manifold_from_config,
    pipeline_tolerance,
    radial_sample_points,
)
from kahler_toolkit.utils.parallel import deterministic_map

logger = get_logger(__name__)

POLYNOMIAL_SCALE = 0.5
POLYNOMIAL_DEGREE = 3
MODIFIED_RADII = (0.3, 0.6, 0.9, 1.2)
RADIAL_RANGE = (0.2, 1.2)

TERM_COLUMNS = [
    "ric_perp",
    "gradient_term",
    "acceleration_term",
    "correction_term",
    "orthogonal_laplacian",
    "hessian_norm",
]
RESIDUAL_FIELDS = ["sample", "frame", "point", "lhs", "rhs", "residual"] + TERM_COLUMNS
MODIFIED_FIELDS = [
    "sample", "r", "point", "ric_perp", "gradient_term", "orthogonal_laplacian",
    "margin", "jacobi_orthogonal_laplacian", "crosscheck",
]


def random_polynomial(dimension: int, rng: np.random.Generator,
                      degree: int = POLYNOMIAL_DEGREE, scale: float = POLYNOMIAL_SCALE) -> str:
    """次数 ≤ degree 的随机多项式 (DSL 文本), 系数 ~ U(−scale, scale)"""
    terms = []
    for order in range(1, degree + 1):
        for combo in combinations_with_replacement(range(1, dimension + 1), order):
            c = rng.uniform(-scale, scale)
            monomial = "*".join(f"x{i}" for i in combo)
            terms.append(f"({c:.12f})*{monomial}")
    return " + ".join(terms)


def unit_gradient_field(spec: ManifoldSpec, f: ScalarField, q) -> ScalarField:
    """把 f 缩放为在 q 点 |∇f| = 1"""
    q = np.asarray(q, dtype=float)
    df = f.jet(spec, q, 1).derivative(1)
    norm2 = float(df @ np.linalg.solve(spec.metric(q), df))
    if not np.isfinite(norm2) or norm2 <= 0.0:
        raise GeometryInputError(f"∇f 在 {q.tolist()} 处为零, 无法归一化")
    scale = 1.0 / np.sqrt(norm2)
    return ScalarField(lambda x: f.jet_fn(x) * scale, role="f", label=f"{scale:.6g}·({f.label})")


def distance_field(spec: ManifoldSpec, base) -> ScalarField:
    """r = d(base, ·) 的闭式Jet"""
    if spec.distance_jet_fn is None:
        raise GeometryInputError(f"{spec.name} 没有闭式距离")
    base = np.asarray(base, dtype=float)
    return ScalarField(lambda x: spec.distance_jet_fn(base, x), role="f", label="r")


def _is_flat(spec: ManifoldSpec) -> bool:
    return spec.metadata.get("einstein") == 0.0


def _radial_range(spec: ManifoldSpec) -> Tuple[float, float]:
    hint = spec.injectivity_radius_hint
    lo, hi = RADIAL_RANGE
    if hint is not None:
        hi = min(hi, 0.8 * hint)
    return lo, hi


def _format_point(q: np.ndarray) -> str:
    return ";".join(format(float(c), ".17g") for c in q)


def _term_row(idx: int, q: np.ndarray, terms: BochnerTerms) -> Dict:
    row = {
        "sample": idx,
        "frame": terms.frame,
        "point": _format_point(q),
        "lhs": terms.lhs,
        "rhs": terms.rhs,
        "residual": terms.residual,
    }
    row.update({key: getattr(terms, key) for key in TERM_COLUMNS})
    return row


@register_plugin
class BochnerVerifyPlugin(Plugin):
    """Bochner 公式验证插件"""

    name = "verify_bochner"
    category = PluginCategory.VERIFY
    description = "修正 Bochner 公式残差与修正 Bochner 不等式"

    def get_required_params(self) -> List[ParamSpec]:
        return [
            ParamSpec("run.manifold", str, "目录项名称或流形文件"),
            ParamSpec("run.f", str, "测试函数: 表达式或 r", required=False),
            ParamSpec("verify.samples", int, "采样点数", required=False, default=20),
            ParamSpec("verify.seed", int, "随机种子", required=False, default=0),
            ParamSpec(
                "verify.bochner_quaternionic_coefficient", str, "四元公式读法",
                required=False, default="derived", choices=["derived", "printed"],
            ),
        ]

    def run(self, config) -> List[ExperimentResult]:
        spec = manifold_from_config(config)
        with LogContext(experiment="verify bochner", seed=config.seed):
            results = [self.bochner_residual(spec, config)]
            results.append(self.modified_bochner_inequality(spec, config))
        return results

    # ------------------------------------------------------------------ 残差

    def _test_function(self, spec: ManifoldSpec, config) -> Tuple[str, Optional[ScalarField]]:
        text = config.get("run.f")
        if text is not None and text.strip().lower() == "r":
            return "distance", None
        if text:
            return "expression", ScalarField.from_text(text, spec.dimension, role="f")
        if spec.distance_jet_fn is not None and not _is_flat(spec):
            return "distance", None
        return "polynomial", None

    def bochner_residual(self, spec: ManifoldSpec, config) -> ExperimentResult:
        """
        凯勒/四元凯勒 Bochner 残差

        四元目录项若标记为需要验证且验证失败, 判定为 SKIPPED。
        """
        start = datetime.now()
        experiment = "bochner_residual_quaternionic" if spec.kind is ManifoldKind.QUATERNIONIC \
            else "bochner_residual_kahler"
        samples, seed = int(config.get("verify.samples", 20)), config.seed
        form = config.get("verify.bochner_quaternionic_coefficient", "derived")
        mode, f_given = self._test_function(spec, config)
        tol = pipeline_tolerance(config) if mode == "distance" else jet_tolerance(config)
        plan = ExperimentPlan(
            manifold=spec.name,
            experiment=experiment,
            samples={"points": samples},
            seeds={"seed": seed},
            tolerances={"residual": tol},
            output_dir=config.output_dir,
        )

        def finish(verdict: Verdict, notes: List[str], **extra) -> ExperimentResult:
            return ExperimentResult(
                experiment=experiment, verdict=verdict, plan=plan, notes=notes,
                fieldnames=RESIDUAL_FIELDS, start_time=start, end_time=datetime.now(), **extra,
            )

        if spec.kind is ManifoldKind.RIEMANNIAN:
            return finish(Verdict.NOT_APPLICABLE, [f"{spec.name} 是黎曼流形, 没有修正 Bochner 公式"])

        measured: Dict = {"test_function": mode, "quaternionic_form": form}
        if spec.metadata.get("needs_validation"):
            validation = validate_catalog_entry(spec, samples=min(samples, 10), seed=seed)
            measured["validation"] = validation
            if validation["status"] != "validated":
                return finish(
                    Verdict.SKIPPED, [f"{spec.name} 未通过目录项验证, 跳过 Bochner 残差"], measured=measured
                )

        rng = np.random.default_rng([seed, 0])
        base = base_point(spec)
        if mode == "distance":
            lo, hi = _radial_range(spec)
            radii = rng.uniform(lo, hi, samples)
            points = np.vstack([radial_sample_points(spec, [r], 1, rng) for r in radii])
        else:
            points = sample_points(spec, rng, samples)

        def evaluate(idx: int) -> List[Dict]:
            q = points[idx]
            if mode == "distance":
                f = distance_field(spec, base)
            elif mode == "expression":
                f = unit_gradient_field(spec, f_given, q)
            else:
                poly = ScalarField.from_text(
                    random_polynomial(spec.dimension, np.random.default_rng([seed, 1, idx])),
                    spec.dimension, role="f",
                )
                f = unit_gradient_field(spec, poly, q)
            return [(_term_row(idx, q, t), t.vacuous) for t in bochner_terms_two_frames(spec, f, q, form)]

        evaluated = deterministic_map(evaluate, range(len(points)), threads=config.threads)
        pairs = [pair for group in evaluated for pair in group]
        report = ResidualReport(
            rows=[row for row, _ in pairs],
            tolerance=tol,
            vacuous=all(vacuous for _, vacuous in pairs),
        )
        notes = []
        if report.vacuous:
            notes.append("结构像已占满切空间, 正交和为空, 检查是平凡的 (vacuous)")
        logger.info(f"{spec.name} {experiment}: 最大残差 {report.max_abs_residual:.3e} (容差 {tol:g})")
        return finish(
            Verdict.from_flag(report.passed),
            notes,
            measured=measured,
            aggregates=report.aggregates(),
            rows=report.rows,
        )

    # ------------------------------------------------------------------ 修正不等式

    def modified_bochner_inequality(self, spec: ManifoldSpec, config) -> ExperimentResult:
        """0 ≥ Ric⊥(∇r,∇r) + g(∇r,∇Δ⊥r) + (Δ⊥r)²/(2n−2), 余量 ≥ −tol 即成立"""
        start = datetime.now()
        samples, seed = int(config.get("verify.samples", 20)), config.seed
        tol = pipeline_tolerance(config)
        hint = spec.injectivity_radius_hint
        radii = [r for r in MODIFIED_RADII if hint is None or r < CUT_FRACTION * hint]
        per_radius = max(1, samples // len(MODIFIED_RADII))
        plan = ExperimentPlan(
            manifold=spec.name,
            experiment="modified_bochner_inequality",
            samples={"per_radius": per_radius},
            seeds={"seed": seed},
            tolerances={"margin": tol, "crosscheck": tol},
            output_dir=config.output_dir,
        )

        def finish(verdict: Verdict, notes: List[str], **extra) -> ExperimentResult:
            return ExperimentResult(
                experiment="modified_bochner_inequality", verdict=verdict, plan=plan, notes=notes,
                fieldnames=MODIFIED_FIELDS, start_time=start, end_time=datetime.now(), **extra,
            )

        if spec.kind is not ManifoldKind.KAHLER:
            return finish(Verdict.NOT_APPLICABLE, [f"修正 Bochner 不等式只针对凯勒流形, {spec.name} 不是"])
        if spec.distance_jet_fn is None:
            return finish(Verdict.NOT_APPLICABLE, [f"{spec.name} 没有闭式距离, 无法取 f = r"])
        if not radii:
            return finish(Verdict.NOT_APPLICABLE, ["没有落在单射半径之内的采样半径"])

        rng = np.random.default_rng([seed, 2])
        points = radial_sample_points(spec, radii, per_radius, rng)
        base = base_point(spec)
        f = distance_field(spec, base)
        terms = deterministic_map(
            lambda idx: bochner_terms(spec, f, points[idx]), range(len(points)), threads=config.threads
        )
        jacobi = radial_derivatives_many(spec, base, points, seed=seed)

        rows = []
        for idx, (q, t, rd) in enumerate(zip(points, terms, jacobi)):
            rows.append({
                "sample": idx,
                "r": rd.distance,
                "point": _format_point(q),
                "ric_perp": t.ric_perp,
                "gradient_term": t.gradient_term,
                "orthogonal_laplacian": t.orthogonal_laplacian,
                "margin": modified_bochner_margin(t, spec.structure_rank, spec.dimension),
                "jacobi_orthogonal_laplacian": rd.orthogonal_laplacian,
                "crosscheck": abs(t.orthogonal_laplacian - rd.orthogonal_laplacian),
            })
        margins = np.array([row["margin"] for row in rows])
        crosscheck = max(row["crosscheck"] for row in rows)
        holds = bool(np.min(margins) >= -tol)
        aggregates = {
            "samples": len(rows),
            "radii": radii,
            "min_margin": float(np.min(margins)),
            "max_margin": float(np.max(margins)),
            "holds": holds,
            "max_crosscheck": float(crosscheck),
        }
        notes = []
        if crosscheck >= tol:
            notes.append(f"闭式 Δ⊥r 与 Jacobi 路线相差 {crosscheck:.3e}")
        logger.info(f"{spec.name} 修正 Bochner 不等式: 最小余量 {aggregates['min_margin']:.3e}")
        return finish(
            Verdict.from_flag(holds and crosscheck < tol),
            notes,
            aggregates=aggregates,
            rows=rows,
        )
