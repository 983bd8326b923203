"""
逐点曲率

Levi-Civita 联络、Riemann/Ricci 张量、全纯与四元截面曲率、正交Ricci曲率、
适配标架、Chern 曲率坐标公式以及结构张量检查。

符号约定: R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z,
R(X,Y,Z,W) = g(R(X,Y)Z, W), 因而截面曲率 K = R(X,Y,Y,X)/|X∧Y|² 在球面上为正。
所有函数接受批量点 (形状 B + (d,)), 面向单个方向的函数只接受单点。
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from kahler_toolkit.core.errors import DegenerateMetricError, FrameError, GeometryInputError
from kahler_toolkit.core.logger import get_logger
from kahler_toolkit.geometry.jet import Jet, einsum, inverse
from kahler_toolkit.geometry.manifold import (
    FRAME_TOL,
    MIN_EIGENVALUE,
    UNIT_TOL,
    ManifoldKind,
    ManifoldSpec,
    OrthonormalFrame,
    TangentVector,
)

logger = get_logger(__name__)

GS_SKIP = 1e-8


# ---------------------------------------------------------------------- 张量计算

def metric_and_christoffel(spec: ManifoldSpec, x: Jet) -> Tuple[Jet, Jet, Jet]:
    """
    由坐标Jet (阶数 o+1) 得到 o 阶的 (g, g⁻¹, Γ)

    Γ[..., k, i, j] = Γ^k_{ij}
    """
    g_full = spec.metric_fn(x)
    dg = g_full.partials()  # dg[..., i, j, k] = ∂_k g_ij
    g = g_full.truncate(dg.order)
    _check_positive(g.v, spec.name)
    ginv = inverse(g)
    lowered = 0.5 * (einsum("...lji->...lij", dg) + dg - einsum("...ijl->...lij", dg))
    gamma = einsum("...kl,...lij->...kij", ginv, lowered)
    return g, ginv, gamma


def _check_positive(g: np.ndarray, name: str) -> None:
    eig = np.linalg.eigvalsh(g)
    low = float(np.min(eig))
    if not np.isfinite(low) or low <= MIN_EIGENVALUE:
        raise DegenerateMetricError(f"{name} 的度量退化, 最小特征值 {low:.3e}")


@dataclass(frozen=True)
class PointGeometry:
    """
    一组点上的曲率张量值

    rup[..., l, i, j, k] = (R(e_i, e_j) e_k)^l, riemann[..., i, j, k, l] = R(e_i, e_j, e_k, e_l)
    """
    points: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    rup: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray

    @property
    def scalar(self) -> np.ndarray:
        return np.einsum("...ij,...ij->...", self.ginv, self.ricci)


def point_geometry(spec: ManifoldSpec, p) -> PointGeometry:
    """在点 (或批量点) 处计算 Γ, R, Ric"""
    x = spec.coordinates(p, 2)
    g, ginv, gamma = metric_and_christoffel(spec, x)
    dgam = gamma.partials().v  # dgam[..., l, i, j, m] = ∂_m Γ^l_ij
    gam = gamma.v
    rup = (
        np.einsum("...ljki->...lijk", dgam)
        - np.einsum("...likj->...lijk", dgam)
        + np.einsum("...lim,...mjk->...lijk", gam, gam)
        - np.einsum("...ljm,...mik->...lijk", gam, gam)
    )
    riemann = np.einsum("...lm,...mijk->...ijkl", g.v, rup)
    ricci = np.einsum("...iijk->...jk", rup)
    return PointGeometry(
        points=np.asarray(p, dtype=float),
        g=g.v,
        ginv=ginv.v,
        gamma=gam,
        rup=rup,
        riemann=riemann,
        ricci=0.5 * (ricci + np.swapaxes(ricci, -1, -2)),
    )


def christoffel(spec: ManifoldSpec, p) -> np.ndarray:
    """Γ^k_{ij}, 数组下标 [k, i, j]"""
    x = spec.coordinates(p, 1)
    return metric_and_christoffel(spec, x)[2].v


def riemann(spec: ManifoldSpec, p) -> np.ndarray:
    """全下标 R(e_i, e_j, e_k, e_l)"""
    return point_geometry(spec, p).riemann


def ricci(spec: ManifoldSpec, p) -> np.ndarray:
    return point_geometry(spec, p).ricci


def scalar_curvature(spec: ManifoldSpec, p) -> np.ndarray:
    return point_geometry(spec, p).scalar


def curvature_form(riemann_tensor: np.ndarray, a, b, c, e) -> float:
    """R(a, b, c, e)"""
    return float(np.einsum("ijkl,i,j,k,l->", riemann_tensor, a, b, c, e))


# ---------------------------------------------------------------------- 方向量

def _vector(v) -> np.ndarray:
    if isinstance(v, TangentVector):
        return v.components
    return np.asarray(v, dtype=float)


def _require_nonzero(v: np.ndarray, g: np.ndarray) -> float:
    norm2 = float(v @ g @ v)
    if not np.all(np.isfinite(v)) or norm2 <= 0.0:
        raise GeometryInputError("方向向量为零")
    return norm2


def _require_kind(spec: ManifoldSpec, kind: ManifoldKind, what: str) -> None:
    if spec.kind is not kind:
        raise GeometryInputError(f"{what} 需要 {kind.value} 流形, {spec.name} 为 {spec.kind.value}")


def sectional_curvature(spec: ManifoldSpec, p, x, y, geometry: Optional[PointGeometry] = None) -> float:
    """K(X, Y) = R(X,Y,Y,X) / (|X|²|Y|² − g(X,Y)²)"""
    geo = geometry or point_geometry(spec, p)
    x, y = _vector(x), _vector(y)
    area = float((x @ geo.g @ x) * (y @ geo.g @ y) - (x @ geo.g @ y) ** 2)
    if area <= 0:
        raise GeometryInputError("两向量线性相关, 截面曲率无定义")
    return curvature_form(geo.riemann, x, y, y, x) / area


def holomorphic_sectional(spec: ManifoldSpec, p, v, geometry: Optional[PointGeometry] = None) -> float:
    """H(v) = R(v, Jv, Jv, v) / |v|⁴"""
    _require_kind(spec, ManifoldKind.KAHLER, "全纯截面曲率")
    geo = geometry or point_geometry(spec, p)
    v = _vector(v)
    norm2 = _require_nonzero(v, geo.g)
    (jmat,) = spec.structure_matrices(p)
    jv = jmat @ v
    return curvature_form(geo.riemann, v, jv, jv, v) / norm2**2


def quaternionic_sectional(spec: ManifoldSpec, p, v, geometry: Optional[PointGeometry] = None) -> float:
    """Q(v) = Σ_{A ∈ {I,J,K}} R(v, Av, Av, v) / |v|⁴"""
    _require_kind(spec, ManifoldKind.QUATERNIONIC, "四元截面曲率")
    geo = geometry or point_geometry(spec, p)
    v = _vector(v)
    norm2 = _require_nonzero(v, geo.g)
    total = 0.0
    for mat in spec.structure_matrices(p):
        av = mat @ v
        total += curvature_form(geo.riemann, v, av, av, v)
    return total / norm2**2


def structure_sectional(spec: ManifoldSpec, p, v, geometry: Optional[PointGeometry] = None) -> float:
    """凯勒返回 H(v), 四元凯勒返回 Q(v)"""
    if spec.kind is ManifoldKind.KAHLER:
        return holomorphic_sectional(spec, p, v, geometry)
    if spec.kind is ManifoldKind.QUATERNIONIC:
        return quaternionic_sectional(spec, p, v, geometry)
    raise GeometryInputError(f"{spec.name} 是黎曼流形, 没有全纯/四元截面曲率")


# ---------------------------------------------------------------------- 标架

def adapted_frame(
    spec: ManifoldSpec,
    p,
    v,
    completion: Optional[Sequence[int]] = None,
    g: Optional[np.ndarray] = None,
) -> OrthonormalFrame:
    """
    适配标准正交标架

    E_1 = v/|v|, 其后依次为结构像 (J E_1 或 I, J, K E_1), 余下由坐标基按 completion 顺序
    (默认下标顺序) 做 Gram–Schmidt 补全, 残差范数低于 1e-8 的候选跳过。

    Raises:
        GeometryInputError: 零向量
        FrameError: 补全失败
    """
    p = np.asarray(p, dtype=float)
    g = spec.metric(p) if g is None else g
    v = _vector(v)
    norm2 = _require_nonzero(v, g)
    e1 = v / np.sqrt(norm2)
    vectors: List[np.ndarray] = [e1] + [mat @ e1 for mat in spec.structure_matrices(p)]
    adapted = len(vectors)

    order = range(spec.dimension) if completion is None else completion
    for idx in order:
        if len(vectors) == spec.dimension:
            break
        w = np.zeros(spec.dimension)
        w[idx] = 1.0
        for _ in range(2):
            for e in vectors:
                w = w - (e @ g @ w) * e
        length = np.sqrt(max(float(w @ g @ w), 0.0))
        if length < GS_SKIP:
            continue
        vectors.append(w / length)

    if len(vectors) != spec.dimension:
        raise FrameError(f"标架补全失败: 只得到 {len(vectors)}/{spec.dimension} 个向量")
    frame = OrthonormalFrame(p, np.array(vectors), adapted_rank=adapted)
    error = frame.orthonormality_error_with(g)
    if error > FRAME_TOL:
        logger.debug(f"{spec.name} 标架正交误差 {error:.2e}")
    return frame


# ---------------------------------------------------------------------- 正交Ricci

@dataclass(frozen=True)
class OrthogonalRicci:
    """Ric⊥(v,v) 的两条计算路线"""
    via_decomposition: float
    via_frame_sum: float

    @property
    def difference(self) -> float:
        return abs(self.via_decomposition - self.via_frame_sum)

    def to_dict(self) -> Dict:
        return {
            "via_decomposition": self.via_decomposition,
            "via_frame_sum": self.via_frame_sum,
            "difference": self.difference,
        }


def require_unit(spec: ManifoldSpec, g: np.ndarray, v: np.ndarray) -> None:
    norm2 = float(v @ g @ v)
    if norm2 == 0.0:
        raise GeometryInputError("方向向量为零")
    if abs(norm2 - 1.0) >= UNIT_TOL:
        raise GeometryInputError(f"需要单位向量, |g(v,v) − 1| = {abs(norm2 - 1.0):.3e}")


def orthogonal_ricci(
    spec: ManifoldSpec,
    p,
    v,
    geometry: Optional[PointGeometry] = None,
    completion: Optional[Sequence[int]] = None,
) -> OrthogonalRicci:
    """
    Ric⊥(v,v), v 为单位向量

    分解路线: Ric(v,v) − H(v) (四元: − Q(v));
    标架路线: Σ R(v, E_i, E_i, v), 求和跳过 span{v, Jv} (四元: span{v, Iv, Jv, Kv})
    """
    if spec.kind is ManifoldKind.RIEMANNIAN:
        raise GeometryInputError(f"{spec.name} 是黎曼流形, 没有正交Ricci曲率")
    geo = geometry or point_geometry(spec, p)
    v = _vector(v)
    require_unit(spec, geo.g, v)
    decomposition = float(v @ geo.ricci @ v) - structure_sectional(spec, p, v, geo)
    frame = adapted_frame(spec, p, v, completion=completion, g=geo.g)
    frame_sum = sum(
        curvature_form(geo.riemann, v, e, e, v) for e in frame.vectors[frame.adapted_rank:]
    )
    return OrthogonalRicci(decomposition, float(frame_sum))


def orthogonal_ricci_value(spec: ManifoldSpec, p, v, geometry: Optional[PointGeometry] = None) -> float:
    """只取分解路线 (采样测量用, 不构造标架)"""
    geo = geometry or point_geometry(spec, p)
    v = _vector(v)
    return float(v @ geo.ricci @ v) - structure_sectional(spec, p, v, geo)


# ---------------------------------------------------------------------- Chern 曲率

def _complex_derivatives(re: Jet, im: Jet, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """由 h 的实/虚部Jet得到 H, ∂_k H, ∂̄_l H, ∂_k∂̄_l H (复数组, 导数下标置前)"""
    h = re.v + 1j * im.v
    d1 = re.d1 + 1j * im.d1  # d1[a] = ∂_{a} (实坐标)
    d2 = re.d2 + 1j * im.d2
    dx, dy = d1[0::2], d1[1::2]
    dk = 0.5 * (dx - 1j * dy)
    dbar = 0.5 * (dx + 1j * dy)
    xx = d2[0::2, 0::2]
    xy = d2[0::2, 1::2]
    yx = d2[1::2, 0::2]
    yy = d2[1::2, 1::2]
    ddbar = 0.25 * (xx + 1j * xy - 1j * yx + yy)
    return h, dk, dbar, ddbar


def chern_curvature_coords(spec: ManifoldSpec, p) -> np.ndarray:
    """
    全纯坐标下 R_{ij̄kl̄} = −∂_k∂̄_l h_{ij̄} + (∂_k h · h⁻¹ · ∂̄_l h)_{ij}

    返回复数组, 下标 [i, j, k, l]

    Raises:
        GeometryInputError: 非凯勒流形或目录项不提供全纯坐标数据
    """
    _require_kind(spec, ManifoldKind.KAHLER, "Chern 曲率")
    if spec.hermitian_fn is None:
        raise GeometryInputError(f"{spec.name} 没有全纯坐标度量数据")
    re, im = spec.hermitian_fn(spec.coordinates(p, 2))
    h, dk, dbar, ddbar = _complex_derivatives(re, im, spec.n)
    hinv = np.linalg.inv(h)
    second = np.einsum("kiq,qp,lpj->ijkl", dk, hinv, dbar)
    return -np.einsum("klij->ijkl", ddbar) + second


def complexify_riemann(riemann_tensor: np.ndarray, n: int) -> np.ndarray:
    """R(∂_a, ∂̄_b, ∂_c, ∂̄_e), ∂_a = ½(∂x_a − i∂y_a)"""
    proj = np.zeros((2 * n, n), dtype=complex)
    for a in range(n):
        proj[2 * a, a] = 0.5
        proj[2 * a + 1, a] = -0.5j
    conj = proj.conj()
    return np.einsum("abce,ai,bj,ck,el->ijkl", riemann_tensor, proj, conj, proj, conj)


CHERN_DICTIONARY = 0.5  # R(∂_i, ∂̄_j, ∂_k, ∂̄_l) = ½ R^{Chern}_{ij̄kl̄} (h_{ij̄} = 2 g(∂_i, ∂̄_j))


def chern_dictionary_residual(spec: ManifoldSpec, p) -> float:
    """Levi-Civita 曲率复化后与 Chern 坐标公式的最大偏差"""
    chern = chern_curvature_coords(spec, p)
    lc = complexify_riemann(riemann(spec, p), spec.n)
    return float(np.max(np.abs(lc - CHERN_DICTIONARY * chern)))


# ---------------------------------------------------------------------- 恒等式

def riemann_identity_residuals(riemann_tensor: np.ndarray) -> Dict[str, float]:
    """对称性与第一Bianchi恒等式, 相对于 max|R| (R ≡ 0 时为绝对值)"""
    r = riemann_tensor
    scale = max(float(np.max(np.abs(r))), 1.0)
    checks = {
        "antisym_12": r + np.swapaxes(r, -4, -3),
        "antisym_34": r + np.swapaxes(r, -2, -1),
        "pair_symmetry": r - np.einsum("...ijkl->...klij", r),
        "bianchi": r + np.einsum("...jkil->...ijkl", r) + np.einsum("...kijl->...ijkl", r),
    }
    return {k: float(np.max(np.abs(v))) / scale for k, v in checks.items()}


def j_invariance_residual(spec: ManifoldSpec, p, geometry: Optional[PointGeometry] = None) -> float:
    """max |R(JX,JY,Z,W) − R(X,Y,Z,W)| / max|R|"""
    _require_kind(spec, ManifoldKind.KAHLER, "J-不变性")
    geo = geometry or point_geometry(spec, p)
    (jmat,) = spec.structure_matrices(p)
    r = geo.riemann
    rotated = np.einsum("...abkl,...ai,...bj->...ijkl", r, jmat, jmat)
    scale = max(float(np.max(np.abs(r))), 1.0)
    return float(np.max(np.abs(rotated - r))) / scale


def einstein_residual(spec: ManifoldSpec, points, constant: float) -> float:
    """max ‖Ric − c·g‖_max"""
    geo = point_geometry(spec, points)
    return float(np.max(np.abs(geo.ricci - constant * geo.g)))


def random_unit_vector(g: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    w = rng.standard_normal(g.shape[-1])
    return w / np.sqrt(w @ g @ w)


def structure_sectional_residual(
    spec: ManifoldSpec, points, constant: float, rng: np.random.Generator
) -> float:
    """max |H(v) − c| (四元: Q) 在每个点取一个随机方向"""
    points = np.atleast_2d(points)
    worst = 0.0
    geo = point_geometry(spec, points)
    for idx, p in enumerate(points):
        single = _select(geo, idx)
        v = random_unit_vector(single.g, rng)
        worst = max(worst, abs(structure_sectional(spec, p, v, single) - constant))
    return worst


def _select(geo: PointGeometry, idx: int) -> PointGeometry:
    return PointGeometry(
        points=geo.points[idx],
        g=geo.g[idx],
        ginv=geo.ginv[idx],
        gamma=geo.gamma[idx],
        rup=geo.rup[idx],
        riemann=geo.riemann[idx],
        ricci=geo.ricci[idx],
    )


def iter_point_geometry(spec: ManifoldSpec, points) -> List[PointGeometry]:
    """批量计算后按点拆分"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    geo = point_geometry(spec, points)
    return [_select(geo, i) for i in range(points.shape[0])]


# ---------------------------------------------------------------------- 结构检查

@dataclass
class StructureReport:
    """结构张量检查结果, 失败项记录在 entries 中 (不抛异常)"""
    manifold: str
    kind: str
    samples: int
    algebraic: float = 0.0
    compatibility: float = 0.0
    parallelism: float = 0.0
    entries: List[Dict] = field(default_factory=list)
    algebraic_tol: float = 1e-9
    parallel_tol: float = 1e-7

    @property
    def max_residual(self) -> float:
        return max(self.algebraic, self.compatibility, self.parallelism)

    @property
    def passed(self) -> bool:
        return (
            self.algebraic < self.algebraic_tol
            and self.compatibility < self.algebraic_tol
            and self.parallelism < self.parallel_tol
        )

    def to_dict(self) -> Dict:
        return {
            "manifold": self.manifold,
            "kind": self.kind,
            "samples": self.samples,
            "algebraic": self.algebraic,
            "compatibility": self.compatibility,
            "parallelism": self.parallelism,
            "passed": self.passed,
            "failures": self.entries,
        }


def covariant_derivative_endomorphism(gamma: np.ndarray, a_jet: Jet) -> np.ndarray:
    """
    (∇_m A)^i_j = ∂_m A^i_j + Γ^i_{mk} A^k_j − Γ^k_{mj} A^i_k

    返回数组下标 [..., m, i, j]
    """
    a = a_jet.v
    da = np.moveaxis(a_jet.d1, 0, -3)  # [..., m, i, j]
    return (
        da
        + np.einsum("...imk,...kj->...mij", gamma, a)
        - np.einsum("...kmj,...ik->...mij", gamma, a)
    )


def _span_residual(target: np.ndarray, basis: Sequence[np.ndarray]) -> float:
    """target 到 span(basis) 的 Frobenius 距离"""
    mat = np.stack([b.ravel() for b in basis], axis=1)
    coef, *_ = np.linalg.lstsq(mat, target.ravel(), rcond=None)
    return float(np.linalg.norm(target.ravel() - mat @ coef))


def structure_check(spec: ManifoldSpec, sample_count: int = 20, seed: int = 0) -> StructureReport:
    """
    结构张量检查

    代数: J² = −Id (四元: I² = J² = K² = IJK = −Id) 与 g(AX, Y) = −g(X, AY);
    平行性: 凯勒 ∇J = 0, 四元 ∇_X I, ∇_X J, ∇_X K 到 span{I, J, K} 的残差
    """
    from kahler_toolkit.geometry.catalog import sample_points

    report = StructureReport(spec.name, spec.kind.value, sample_count)
    if spec.kind is ManifoldKind.RIEMANNIAN:
        return report

    rng = np.random.default_rng(seed)
    points = sample_points(spec, rng, sample_count)
    x = spec.coordinates(points, 1)
    g, _, gamma = metric_and_christoffel(spec, x)
    g = g.v
    structs = [fn(x) for fn in spec.structure_fns]
    eye = np.eye(spec.dimension)

    for idx in range(points.shape[0]):
        mats = [s.v[idx] for s in structs]
        algebraic = [m @ m + eye for m in mats]
        if len(mats) == 3:
            algebraic.append(mats[0] @ mats[1] @ mats[2] + eye)
        alg = max(float(np.max(np.abs(r))) for r in algebraic)
        comp = max(float(np.max(np.abs(m.T @ g[idx] + g[idx] @ m))) for m in mats)

        nabla = [
            covariant_derivative_endomorphism(gamma.v[idx], Jet(s.v[idx], s.d1[:, idx], dim=s.dim))
            for s in structs
        ]
        if len(mats) == 1:
            par = float(np.max(np.abs(nabla[0])))
        else:
            par = max(
                _span_residual(nab[m], mats) for nab in nabla for m in range(spec.dimension)
            )

        report.algebraic = max(report.algebraic, alg)
        report.compatibility = max(report.compatibility, comp)
        report.parallelism = max(report.parallelism, par)
        if alg >= report.algebraic_tol or comp >= report.algebraic_tol or par >= report.parallel_tol:
            report.entries.append(
                {"point": points[idx].tolist(), "algebraic": alg, "compatibility": comp, "parallelism": par}
            )

    if report.passed:
        logger.debug(f"{spec.name} 结构检查通过, 最大残差 {report.max_residual:.2e}")
    else:
        logger.warning(f"{spec.name} 结构检查失败 {len(report.entries)}/{sample_count} 个点")
    return report


__all__ = [
    "PointGeometry",
    "OrthogonalRicci",
    "StructureReport",
    "metric_and_christoffel",
    "point_geometry",
    "iter_point_geometry",
    "christoffel",
    "riemann",
    "ricci",
    "scalar_curvature",
    "sectional_curvature",
    "holomorphic_sectional",
    "quaternionic_sectional",
    "structure_sectional",
    "adapted_frame",
    "orthogonal_ricci",
    "orthogonal_ricci_value",
    "chern_curvature_coords",
    "complexify_riemann",
    "chern_dictionary_residual",
    "riemann_identity_residuals",
    "j_invariance_residual",
    "einstein_residual",
    "structure_sectional_residual",
    "random_unit_vector",
    "structure_check",
    "require_unit",
    "curvature_form",
    "covariant_derivative_endomorphism",
]
