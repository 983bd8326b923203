"""
闭式流形目录

所有目录项都以坐标Jet上的闭式表达给出度量、结构张量, 凯勒项额外给出全纯坐标下的
h_{ij̄} (Chern曲率交叉校验用), 射影空间与乘积项给出闭式距离函数。

归一化: ℂPⁿ 与 ℍPⁿ 均取 ℂP¹/ℍP¹ 切片截面曲率为 4 (H ≡ 4, Q ≡ 12)。
"""

import re
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from kahler_toolkit.core.errors import ConfigError
from kahler_toolkit.core.logger import get_logger
from kahler_toolkit.geometry.jet import Jet, einsum, stack
from kahler_toolkit.geometry.manifold import (
    ChartDomain,
    ManifoldKind,
    ManifoldSpec,
    constant_matrix_field,
)
from kahler_toolkit.geometry.metric_dsl import Expression, evaluate_on, parse_expression

logger = get_logger(__name__)

# 复结构块: J ∂x = ∂y
COMPLEX_BLOCK = np.array([[0.0, -1.0], [1.0, 0.0]])

# 四元数左乘 q ↦ i q, j q, k q, 坐标 (a, b, c, d) ~ a + bi + cj + dk
LEFT_I = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
LEFT_J = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
LEFT_K = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=float)

# 四元数右乘 q ↦ q i, q j, q k
RIGHT_I = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]], dtype=float)
RIGHT_J = np.array([[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)
RIGHT_K = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, -1, 0, 0], [1, 0, 0, 0]], dtype=float)

HALF_PI = np.pi / 2

FIXED_ENTRIES = ("s2-polar", "s2-half", "cp1", "cp2", "cp3", "cp1xcp1", "hp1", "hp2")
LISTED_FLAT = ("flat-r2", "flat-r4", "flat-c1", "flat-c2", "flat-c3", "flat-h1", "flat-h2")

_FLAT_PATTERN = re.compile(r"^flat-([rch])(\d+)$")


# ---------------------------------------------------------------------- 结构张量

def complex_structure(n: int) -> np.ndarray:
    """交错坐标 (x1, y1, x2, y2, ...) 上的标准复结构"""
    return np.kron(np.eye(n), COMPLEX_BLOCK)


def quaternion_left(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """逐分量四元数左乘, 满足 IJ = K"""
    return tuple(np.kron(np.eye(n), m) for m in (LEFT_I, LEFT_J, LEFT_K))


def quaternion_right(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """逐分量右乘共轭单位 q ↦ q(-i), q(-j), q(-k); 满足 IJ = K, 且与 ℍPⁿ 仿射卡度量相容"""
    return tuple(-np.kron(np.eye(n), m) for m in (RIGHT_I, RIGHT_J, RIGHT_K))


def _conjugate_left_tensor(n: int) -> np.ndarray:
    """
    常张量 T[c, a, b], 使 Σ_c x_c T[c] = [L(q̄_1) ... L(q̄_n)] (4 × 4n)

    L(q̄) = a·Id − b·L_i − c·L_j − d·L_k
    """
    d = 4 * n
    t = np.zeros((d, 4, d))
    for i in range(n):
        block = slice(4 * i, 4 * i + 4)
        for c, m in enumerate((np.eye(4), -LEFT_I, -LEFT_J, -LEFT_K)):
            t[4 * i + c, :, block] = m
    return t


# ---------------------------------------------------------------------- Jet 工具

def _sq_norm(x: Jet) -> Jet:
    return (x * x).sum(-1)


def _scaled_matrix(s: Jet, matrix: np.ndarray) -> Jet:
    """标量Jet (值形状 B) 乘常矩阵, 结果值形状 B + matrix.shape"""
    return s.reshape_value(s.shape + (1,) * matrix.ndim) * matrix


def _outer(a: Jet, b: Jet) -> Jet:
    return einsum("...i,...j->...ij", a, b)


def _apply(matrix: np.ndarray, x: Jet) -> Jet:
    return einsum("...ij,...j->...i", matrix, x)


def _zero_matrix(x: Jet, d: int) -> Jet:
    return Jet.constant(np.zeros(x.shape[:-1] + (d, d)), x.dim, x.order)


# ---------------------------------------------------------------------- 度量

def conformal_metric(scale: float = 1.0) -> Callable[[Jet], Jet]:
    """g = scale · I / (1 + scale|x|²)², scale=1 为 ℂP¹ / ℍP¹, scale=4 为 S²(½) 球极投影卡"""

    def fn(x: Jet) -> Jet:
        w = (1.0 + scale * _sq_norm(x)).power(-2.0) * scale
        return _scaled_matrix(w, np.eye(x.shape[-1]))

    return fn


def fubini_study_metric(n: int) -> Callable[[Jet], Jet]:
    """ℂPⁿ 仿射卡: g = I/(1+s) − (x xᵀ + Jx (Jx)ᵀ)/(1+s)²"""
    jmat = complex_structure(n)

    def fn(x: Jet) -> Jet:
        q = (1.0 + _sq_norm(x)).reciprocal()
        jx = _apply(jmat, x)
        rank2 = _outer(x, x) + _outer(jx, jx)
        return _scaled_matrix(q, np.eye(2 * n)) - rank2 * (q * q).reshape_value(q.shape + (1, 1))

    return fn


def quaternionic_fs_metric(n: int) -> Callable[[Jet], Jet]:
    """ℍPⁿ 仿射卡: g = I/(1+s) − AᵀA/(1+s)², A X = Σ q̄_i X_i"""
    tensor = _conjugate_left_tensor(n)

    def fn(x: Jet) -> Jet:
        q = (1.0 + _sq_norm(x)).reciprocal()
        a = einsum("...c,...cab->...ab", x, tensor)
        ata = einsum("...ai,...aj->...ij", a, a)
        return _scaled_matrix(q, np.eye(4 * n)) - ata * (q * q).reshape_value(q.shape + (1, 1))

    return fn


def product_sphere_metric(x: Jet) -> Jet:
    """ℂP¹ × ℂP¹: 两个 (1+|z_i|²)^{-2} 共形块"""
    w1 = (1.0 + _sq_norm(x[..., 0:2])).power(-2.0)
    w2 = (1.0 + _sq_norm(x[..., 2:4])).power(-2.0)
    e1 = np.diag([1.0, 1.0, 0.0, 0.0])
    e2 = np.diag([0.0, 0.0, 1.0, 1.0])
    return _scaled_matrix(w1, e1) + _scaled_matrix(w2, e2)


def polar_sphere_metric(x: Jet) -> Jet:
    """单位球面极坐标 g = dr² + sin²r dθ²"""
    s = x[..., 0].sin()
    return _scaled_matrix(s * s, np.diag([0.0, 1.0])) + np.diag([1.0, 0.0])


# ---------------------------------------------------------------------- 全纯坐标数据 h_{ij̄}

def flat_hermitian(n: int) -> Callable[[Jet], Tuple[Jet, Jet]]:
    def fn(x: Jet) -> Tuple[Jet, Jet]:
        one = Jet.constant(np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy(), x.dim, x.order)
        return one, _zero_matrix(x, n)

    return fn


def fubini_study_hermitian(n: int, scale: float = 1.0) -> Callable[[Jet], Tuple[Jet, Jet]]:
    """
    h_{ij̄} = δ_ij/(1+s) − z̄_i z_j/(1+s)², z_j = x_{2j-1} + i x_{2j}

    scale ≠ 1 只用于 n = 1 的 S²(½) 卡 (z = 2u): h = scale/(1+scale·s)²
    """

    def fn(x: Jet) -> Tuple[Jet, Jet]:
        if scale != 1.0:
            w = (1.0 + scale * _sq_norm(x)).power(-2.0) * scale
            return _scaled_matrix(w, np.eye(1)), _zero_matrix(x, 1)
        a, b = x[..., 0::2], x[..., 1::2]
        q = (1.0 + _sq_norm(x)).reciprocal()
        q2 = (q * q).reshape_value(q.shape + (1, 1))
        re = _scaled_matrix(q, np.eye(n)) - (_outer(a, a) + _outer(b, b)) * q2
        im = (_outer(a, b) - _outer(b, a)) * q2 * -1.0
        return re, im

    return fn


def product_sphere_hermitian(x: Jet) -> Tuple[Jet, Jet]:
    w1 = (1.0 + _sq_norm(x[..., 0:2])).power(-2.0)
    w2 = (1.0 + _sq_norm(x[..., 2:4])).power(-2.0)
    re = _scaled_matrix(w1, np.diag([1.0, 0.0])) + _scaled_matrix(w2, np.diag([0.0, 1.0]))
    return re, _zero_matrix(x, 2)


# ---------------------------------------------------------------------- 闭式距离

def euclidean_distance_jet(base: np.ndarray, x: Jet) -> Jet:
    return _sq_norm(x - np.asarray(base, dtype=float)).sqrt()


def complex_projective_distance_jet(base: np.ndarray, x: Jet, scale: float = 1.0) -> Jet:
    """
    ℂPⁿ (H=4) 距离: cos r = |1 + ⟨x, p⟩_ℂ| / √((1+|p|²)(1+|x|²))

    scale 为坐标缩放 (S²(½) 卡取 4, 即 z = 2u)
    """
    c = np.sqrt(scale)
    p = c * np.asarray(base, dtype=float)
    z = x * c
    n = p.shape[-1] // 2
    jp = complex_structure(n) @ p
    re = 1.0 + (z * p).sum(-1)
    im = (z * jp).sum(-1)
    ratio = (re * re + im * im) / ((1.0 + float(p @ p)) * (1.0 + _sq_norm(z)))
    return ratio.sqrt().arccos()


def quaternionic_projective_distance_jet(base: np.ndarray, x: Jet) -> Jet:
    """ℍPⁿ 距离: cos r = |1 + Σ p̄_i x_i| / √((1+|p|²)(1+|x|²))"""
    p = np.asarray(base, dtype=float)
    n = p.shape[-1] // 4
    ap = np.einsum("c,cab->ab", p, _conjugate_left_tensor(n))
    w = _apply(ap, x) + np.array([1.0, 0.0, 0.0, 0.0])
    ratio = _sq_norm(w) / ((1.0 + float(p @ p)) * (1.0 + _sq_norm(x)))
    return ratio.sqrt().arccos()


def product_sphere_distance_jet(base: np.ndarray, x: Jet) -> Jet:
    p = np.asarray(base, dtype=float)
    r1 = complex_projective_distance_jet(p[0:2], x[..., 0:2])
    r2 = complex_projective_distance_jet(p[2:4], x[..., 2:4])
    return (r1 * r1 + r2 * r2).sqrt()


def polar_sphere_distance_jet(base: np.ndarray, x: Jet) -> Jet:
    """单位球面: cos d = cos r₁ cos r₂ + sin r₁ sin r₂ cos(θ₁ − θ₂)"""
    p = np.asarray(base, dtype=float)
    r, theta = x[..., 0], x[..., 1]
    cos_d = r.cos() * np.cos(p[0]) + r.sin() * np.sin(p[0]) * (theta - p[1]).cos()
    return cos_d.arccos()


# ---------------------------------------------------------------------- 原点出发的测地点

def _tangent_radial(scale: float = 1.0) -> Callable[[np.ndarray, float], np.ndarray]:
    """射影空间: 原点沿单位方向 u 走距离 r 到达 |x| = tan(r)/√scale"""

    def fn(u: np.ndarray, r: float) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.tan(r) / np.sqrt(scale) * u / np.linalg.norm(u)

    return fn


def _flat_radial(u: np.ndarray, r: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return r * u / np.linalg.norm(u)


def _product_radial(u: np.ndarray, r: float) -> np.ndarray:
    u = np.asarray(u, dtype=float) / np.linalg.norm(u)
    out = np.zeros(4)
    for block in (slice(0, 2), slice(2, 4)):
        length = np.linalg.norm(u[block])
        if length > 0:
            out[block] = np.tan(r * length) * u[block] / length
    return out


# ---------------------------------------------------------------------- 目录项构造

def _flat(kind: str, count: int) -> ManifoldSpec:
    if count < 1:
        raise ConfigError(f"平坦目录项维数必须 ≥ 1: flat-{kind}{count}")
    if kind == "r":
        d, mkind, structures, hermitian = count, ManifoldKind.RIEMANNIAN, (), None
        desc = f"欧氏空间 ℝ^{count}"
    elif kind == "c":
        d, mkind = 2 * count, ManifoldKind.KAHLER
        structures = (constant_matrix_field(complex_structure(count)),)
        hermitian = flat_hermitian(count)
        desc = f"平坦 ℂ^{count}, 标准复结构"
    else:
        d, mkind = 4 * count, ManifoldKind.QUATERNIONIC
        structures = tuple(constant_matrix_field(m) for m in quaternion_left(count))
        hermitian = None
        desc = f"平坦 ℍ^{count}, 四元数左乘"
    return ManifoldSpec(
        name=f"flat-{kind}{count}",
        dimension=d,
        kind=mkind,
        metric_fn=constant_matrix_field(np.eye(d)),
        structure_fns=structures,
        injectivity_radius_hint=None,
        description=desc,
        hermitian_fn=hermitian,
        distance_jet_fn=euclidean_distance_jet,
        metadata={
            "einstein": 0.0,
            "structure_constant": 0.0 if mkind is not ManifoldKind.RIEMANNIAN else None,
            "diameter": float("inf"),
            "base_point": np.zeros(d),
            "radial_point": _flat_radial,
        },
    )


def _complex_projective(n: int) -> ManifoldSpec:
    return ManifoldSpec(
        name=f"cp{n}",
        dimension=2 * n,
        kind=ManifoldKind.KAHLER,
        metric_fn=conformal_metric() if n == 1 else fubini_study_metric(n),
        structure_fns=(constant_matrix_field(complex_structure(n)),),
        injectivity_radius_hint=HALF_PI,
        description=f"ℂP^{n} Fubini–Study 仿射卡 (H ≡ 4)",
        hermitian_fn=fubini_study_hermitian(n),
        distance_jet_fn=complex_projective_distance_jet,
        metadata={
            "einstein": 2.0 * (n + 1),
            "structure_constant": 4.0,
            "diameter": HALF_PI,
            "base_point": np.zeros(2 * n),
            "radial_point": _tangent_radial(),
        },
    )


def _sphere_half() -> ManifoldSpec:
    def distance(base, x):
        return complex_projective_distance_jet(base, x, scale=4.0)

    return ManifoldSpec(
        name="s2-half",
        dimension=2,
        kind=ManifoldKind.KAHLER,
        metric_fn=conformal_metric(4.0),
        structure_fns=(constant_matrix_field(COMPLEX_BLOCK),),
        injectivity_radius_hint=HALF_PI,
        description="半径 ½ 的球面 S²(½) ≅ ℂP¹, 球极投影卡",
        hermitian_fn=fubini_study_hermitian(1, scale=4.0),
        distance_jet_fn=distance,
        metadata={
            "einstein": 4.0,
            "structure_constant": 4.0,
            "diameter": HALF_PI,
            "base_point": np.zeros(2),
            "radial_point": _tangent_radial(4.0),
            "sample_box": [(-0.5, 0.5)] * 2,
        },
    )


def _sphere_polar() -> ManifoldSpec:
    return ManifoldSpec(
        name="s2-polar",
        dimension=2,
        kind=ManifoldKind.RIEMANNIAN,
        metric_fn=polar_sphere_metric,
        injectivity_radius_hint=np.pi,
        chart_domain=ChartDomain("box", bounds=((0.0, np.pi), (-np.inf, np.inf))),
        description="单位球面 S², 极坐标卡 dr² + sin²r dθ²",
        distance_jet_fn=polar_sphere_distance_jet,
        metadata={
            "einstein": 1.0,
            "structure_constant": None,
            "diameter": np.pi,
            "base_point": np.array([HALF_PI, 0.0]),
            "sample_box": [(0.4, np.pi - 0.4), (-np.pi, np.pi)],
        },
    )


def _product_spheres() -> ManifoldSpec:
    return ManifoldSpec(
        name="cp1xcp1",
        dimension=4,
        kind=ManifoldKind.KAHLER,
        metric_fn=product_sphere_metric,
        structure_fns=(constant_matrix_field(complex_structure(2)),),
        injectivity_radius_hint=HALF_PI,
        description="乘积 ℂP¹ × ℂP¹ (各因子 H = 4)",
        hermitian_fn=product_sphere_hermitian,
        distance_jet_fn=product_sphere_distance_jet,
        metadata={
            "einstein": 4.0,
            "structure_constant": None,
            "diameter": np.pi / np.sqrt(2.0),
            "base_point": np.zeros(4),
            "radial_point": _product_radial,
        },
    )


def _quaternionic_projective(n: int) -> ManifoldSpec:
    if n == 1:
        metric = conformal_metric()
        structures = tuple(constant_matrix_field(m) for m in quaternion_left(1))
        desc = "ℍP¹ ≅ S⁴(½) 仿射卡, 四元数左乘"
    else:
        metric = quaternionic_fs_metric(n)
        structures = tuple(constant_matrix_field(m) for m in quaternion_right(n))
        desc = f"ℍP^{n} 仿射卡 (四元 Fubini–Study), 右乘结构, 需运行时验证"
    return ManifoldSpec(
        name=f"hp{n}",
        dimension=4 * n,
        kind=ManifoldKind.QUATERNIONIC,
        metric_fn=metric,
        structure_fns=structures,
        injectivity_radius_hint=HALF_PI,
        description=desc,
        distance_jet_fn=quaternionic_projective_distance_jet,
        metadata={
            "einstein": 4.0 * (n + 2),
            "structure_constant": 12.0,
            "diameter": HALF_PI,
            "base_point": np.zeros(4 * n),
            "radial_point": _tangent_radial(),
            "needs_validation": n >= 2,
        },
    )


_BUILDERS: Dict[str, Callable[[], ManifoldSpec]] = {
    "s2-polar": _sphere_polar,
    "s2-half": _sphere_half,
    "cp1": lambda: _complex_projective(1),
    "cp2": lambda: _complex_projective(2),
    "cp3": lambda: _complex_projective(3),
    "cp1xcp1": _product_spheres,
    "hp1": lambda: _quaternionic_projective(1),
    "hp2": lambda: _quaternionic_projective(2),
}


def catalog_names() -> List[str]:
    """列出目录项名称 (平坦项列出常用维数)"""
    return list(LISTED_FLAT) + list(FIXED_ENTRIES)


def get_manifold(name: str) -> ManifoldSpec:
    """
    按名称取目录项

    Raises:
        ConfigError: 目录中不存在该名称
    """
    key = name.strip().lower()
    match = _FLAT_PATTERN.match(key)
    if match:
        return _flat(match.group(1), int(match.group(2)))
    if key not in _BUILDERS:
        raise ConfigError(f"目录中不存在流形: {name}", available=catalog_names())
    return _BUILDERS[key]()


def is_catalog_name(name: str) -> bool:
    key = name.strip().lower()
    return bool(_FLAT_PATTERN.match(key)) or key in _BUILDERS


# ---------------------------------------------------------------------- 采样与变换

def base_point(spec: ManifoldSpec) -> np.ndarray:
    return np.asarray(spec.metadata.get("base_point", np.zeros(spec.dimension)), dtype=float)


def sample_points(spec: ManifoldSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """
    在坐标卡内均匀采样 (用于性质测试)

    优先使用 metadata 的 sample_box, 其次按定义域收缩, 默认 [-1, 1]^d
    """
    box = spec.metadata.get("sample_box")
    if box is None:
        domain = spec.chart_domain
        if domain.kind == "ball":
            half = min(1.0, 0.5 * domain.radius / np.sqrt(spec.dimension))
            box = [(-half, half)] * spec.dimension
        elif domain.kind == "box":
            box = []
            for lo, hi in domain.bounds:
                lo_f = lo if np.isfinite(lo) else -1.0
                hi_f = hi if np.isfinite(hi) else 1.0
                pad = 0.1 * (hi_f - lo_f)
                box.append((lo_f + pad, hi_f - pad))
        else:
            box = [(-1.0, 1.0)] * spec.dimension
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    return lo + (hi - lo) * rng.random((count, spec.dimension))


def radial_point(spec: ManifoldSpec, direction, r: float) -> np.ndarray:
    """
    从 base_point 沿方向走测地距离 r 的点 (闭式)

    Raises:
        ConfigError: 目录项没有闭式径向点
    """
    fn = spec.metadata.get("radial_point")
    if fn is None:
        raise ConfigError(f"{spec.name} 没有闭式径向点")
    return base_point(spec) + fn(np.asarray(direction, dtype=float), r)


def perturb_conformal(spec: ManifoldSpec, factor: Expression) -> ManifoldSpec:
    """
    共形扰动 g ↦ (factor) · g

    结构张量不变 (共形因子保持 J 的正交性, 但一般不再是凯勒的);
    闭式距离、全纯数据与已知常数全部丢弃。
    """
    if factor.dimension != spec.dimension:
        raise ConfigError("共形因子表达式维数与流形不一致")
    base_fn = spec.metric_fn

    def metric(x: Jet) -> Jet:
        w = evaluate_on(factor, x)
        return _scaled_matrix(w, np.ones((1, 1))) * base_fn(x)

    metadata = {k: v for k, v in spec.metadata.items() if k in ("base_point", "sample_box", "radial_point")}
    metadata["perturbed_from"] = spec.name
    return ManifoldSpec(
        name=f"{spec.name}~{factor.pretty()}",
        dimension=spec.dimension,
        kind=spec.kind,
        metric_fn=metric,
        structure_fns=spec.structure_fns,
        injectivity_radius_hint=spec.injectivity_radius_hint,
        chart_domain=spec.chart_domain,
        description=f"{spec.description}, 共形扰动 {factor.pretty()}",
        source="perturbed",
        metadata=metadata,
    )


def perturb_conformal_text(spec: ManifoldSpec, text: str) -> ManifoldSpec:
    return perturb_conformal(spec, parse_expression(text, spec.dimension))


# ---------------------------------------------------------------------- 验证

def validate_catalog_entry(spec: ManifoldSpec, samples: int = 20, seed: int = 0) -> Dict:
    """
    目录项运行时验证: 结构检查、Einstein 常数与 H/Q 常数

    Returns:
        {"name", "status": "validated" | "failed", "checks": {...}}
    """
    from kahler_toolkit.geometry.curvature import (
        einstein_residual,
        structure_check,
        structure_sectional_residual,
    )

    rng = np.random.default_rng(seed)
    points = sample_points(spec, rng, samples)
    checks: Dict[str, Dict] = {}

    report = structure_check(spec, sample_count=samples, seed=seed)
    checks["structure"] = {"passed": report.passed, "max_residual": report.max_residual}

    einstein = spec.metadata.get("einstein")
    if einstein is not None:
        residual = einstein_residual(spec, points, einstein)
        checks["einstein"] = {"passed": residual < 1e-7, "constant": einstein, "max_residual": residual}

    constant = spec.metadata.get("structure_constant")
    if constant is not None and spec.kind is not ManifoldKind.RIEMANNIAN:
        residual = structure_sectional_residual(spec, points, constant, rng)
        checks["sectional"] = {"passed": residual < 1e-7, "constant": constant, "max_residual": residual}

    status = "validated" if all(c["passed"] for c in checks.values()) else "failed"
    log = logger.info if status == "validated" else logger.warning
    log(f"目录项 {spec.name} 验证结果: {status}")
    return {"name": spec.name, "status": status, "checks": checks}


def describe_entry(spec: ManifoldSpec) -> Dict:
    info = spec.describe()
    info["diameter"] = spec.metadata.get("diameter")
    info["einstein"] = spec.metadata.get("einstein")
    info["structure_constant"] = spec.metadata.get("structure_constant")
    info["has_hermitian_data"] = spec.hermitian_fn is not None
    info["has_distance"] = spec.distance_jet_fn is not None
    info["status"] = "requires-validation" if spec.metadata.get("needs_validation") else "closed-form"
    return info


__all__ = [
    "complex_structure",
    "quaternion_left",
    "quaternion_right",
    "catalog_names",
    "get_manifold",
    "is_catalog_name",
    "base_point",
    "sample_points",
    "radial_point",
    "perturb_conformal",
    "perturb_conformal_text",
    "validate_catalog_entry",
    "describe_entry",
    "euclidean_distance_jet",
    "complex_projective_distance_jet",
    "quaternionic_projective_distance_jet",
]
