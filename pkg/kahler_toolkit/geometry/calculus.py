"""
标量场与向量场的微分运算

梯度、Hessian、Laplace 与正交 Laplace, 向量场的 Lie 导数与 (∇Z)♭,
Bakry–Émery 型张量, 以及把逐点曲率量汇总成 CurvatureReport。
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from kahler_toolkit.core.errors import GeometryInputError
from kahler_toolkit.geometry.curvature import (
    OrthogonalRicci,
    PointGeometry,
    adapted_frame,
    christoffel,
    metric_and_christoffel,
    orthogonal_ricci,
    point_geometry,
    require_unit,
    structure_sectional,
)
from kahler_toolkit.geometry.jet import Jet, einsum
from kahler_toolkit.geometry.manifold import (
    ManifoldKind,
    ManifoldSpec,
    ScalarField,
    TangentVector,
    VectorField,
)

GRADIENT_FLOOR = 1e-12

BE_DENOMINATORS = ("real-dim", "printed")


# ---------------------------------------------------------------------- Jet 层

def hessian_jet(f: Jet, gamma: Jet) -> Jet:
    """Hess f_ab = ∂_a∂_b f − Γ^k_ab ∂_k f (f 的阶数至少比结果高 2)"""
    df = f.partials()
    ddf = df.partials()
    order = min(ddf.order, gamma.order)
    df, ddf, gamma = df.truncate(order), ddf.truncate(order), gamma.truncate(order)
    return ddf - einsum("...kab,...k->...ab", gamma, df)


def gradient_jet(f: Jet, ginv: Jet) -> Jet:
    """∇f^a = g^{ab} ∂_b f"""
    df = f.partials()
    order = min(df.order, ginv.order)
    return einsum("...ab,...b->...a", ginv.truncate(order), df.truncate(order))


def covariant_derivative(gamma: np.ndarray, x: np.ndarray, y: Jet) -> np.ndarray:
    """(∇_X Y)^k = X^a ∂_a Y^k + Γ^k_ab X^a Y^b, 只取值"""
    dy = y.derivative(1)  # [k, a]
    return dy @ x + np.einsum("kab,a,b->k", gamma, x, y.v)


# ---------------------------------------------------------------------- 标量场

def gradient(spec: ManifoldSpec, f: ScalarField, p) -> TangentVector:
    """g(∇f, w) = df(w)"""
    p = np.asarray(p, dtype=float)
    jet = f.jet(spec, p, 1)
    ginv = np.linalg.inv(spec.metric(p))
    return TangentVector(p, ginv @ jet.derivative(1))


def hessian(spec: ManifoldSpec, f: ScalarField, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    jet = f.jet(spec, p, 2)
    gamma = christoffel(spec, p)
    h = jet.derivative(2) - np.einsum("kab,k->ab", gamma, jet.derivative(1))
    return 0.5 * (h + h.T)


def laplacian(spec: ManifoldSpec, f: ScalarField, p) -> float:
    p = np.asarray(p, dtype=float)
    ginv = np.linalg.inv(spec.metric(p))
    return float(np.einsum("ab,ab->", ginv, hessian(spec, f, p)))


def orthogonal_laplacian(
    spec: ManifoldSpec,
    f: ScalarField,
    p,
    completion: Optional[Sequence[int]] = None,
    route: str = "frame",
) -> float:
    """
    Δ⊥f

    route="frame": Σ_{i>rank} Hess f(E_i, E_i) 在适配标架上求和;
    route="subtract": Δf − Σ_{a<rank} Hess f(E_a, E_a), E_1 = ∇f/|∇f| 及其结构像

    Raises:
        GeometryInputError: ∇f(p) = 0 或黎曼流形
    """
    if spec.kind is ManifoldKind.RIEMANNIAN:
        raise GeometryInputError(f"{spec.name} 是黎曼流形, 正交 Laplace 无定义")
    p = np.asarray(p, dtype=float)
    grad = gradient(spec, f, p).components
    g = spec.metric(p)
    if np.sqrt(max(float(grad @ g @ grad), 0.0)) < GRADIENT_FLOOR:
        raise GeometryInputError("∇f 在该点为零, 无法构造适配标架")
    hess = hessian(spec, f, p)
    frame = adapted_frame(spec, p, grad, completion=completion, g=g)
    if route == "frame":
        vectors = frame.vectors[frame.adapted_rank:]
        return float(sum(e @ hess @ e for e in vectors))
    ginv = np.linalg.inv(g)
    total = float(np.einsum("ab,ab->", ginv, hess))
    return total - float(sum(e @ hess @ e for e in frame.vectors[: frame.adapted_rank]))


# ---------------------------------------------------------------------- 向量场

def _field_jets(spec: ManifoldSpec, z: VectorField, p):
    x = spec.coordinates(np.asarray(p, dtype=float), 1)
    g_jet = spec.metric_fn(x)
    z_jet = z.jet_fn(x)
    return g_jet, z_jet


def lie_derivative_metric(spec: ManifoldSpec, z: VectorField, p) -> np.ndarray:
    """(ℒ_Z g)_ij = Z^k ∂_k g_ij + g_kj ∂_i Z^k + g_ik ∂_j Z^k"""
    g_jet, z_jet = _field_jets(spec, z, p)
    g, dg = g_jet.v, g_jet.derivative(1)
    zv, dz = z_jet.v, z_jet.derivative(1)  # dz[k, i] = ∂_i Z^k
    return (
        np.einsum("k,ijk->ij", zv, dg)
        + np.einsum("kj,ki->ij", g, dz)
        + np.einsum("ik,kj->ij", g, dz)
    )


def nabla_z_flat(spec: ManifoldSpec, z: VectorField, p) -> np.ndarray:
    """(∇Z)♭(X, Y) = ½(⟨∇_X Z, Y⟩ + ⟨∇_Y Z, X⟩)"""
    p = np.asarray(p, dtype=float)
    g_jet, z_jet = _field_jets(spec, z, p)
    gamma = christoffel(spec, p)
    nabla = z_jet.derivative(1) + np.einsum("kil,l->ki", gamma, z_jet.v)  # [k, i] = ∇_i Z^k
    lowered = np.einsum("kj,ki->ij", g_jet.v, nabla)
    return 0.5 * (lowered + lowered.T)


# ---------------------------------------------------------------------- Bakry–Émery

def be_denominator(spec: ManifoldSpec, m: float, z: VectorField, mode: str) -> Optional[float]:
    """Z⊗Z 项的分母 m − d (printed: m − n); Z ≡ 0 时返回 None"""
    if mode not in BE_DENOMINATORS:
        raise GeometryInputError(f"未知的 be_denominator: {mode}")
    reference = spec.dimension if mode == "real-dim" else spec.n
    if m < spec.dimension and mode == "real-dim":
        raise GeometryInputError(f"m = {m} 小于实维数 {spec.dimension}")
    if z.is_zero:
        return None
    if m <= reference:
        raise GeometryInputError(f"m = {m} ≤ {reference} 时要求 Z ≡ 0")
    return m - reference


def bakry_emery_mz(
    spec: ManifoldSpec,
    p,
    v,
    m: float,
    z: Optional[VectorField] = None,
    denominator: str = "real-dim",
    geometry: Optional[PointGeometry] = None,
) -> float:
    """Ric⊥_{m,Z}(v,v) = Ric⊥(v,v) − (∇Z)♭(v,v) − ⟨Z, v⟩²/(m − d)"""
    z = z or VectorField.zero()
    p = np.asarray(p, dtype=float)
    geo = geometry or point_geometry(spec, p)
    v = np.asarray(v.components if isinstance(v, TangentVector) else v, dtype=float)
    require_unit(spec, geo.g, v)
    denom = be_denominator(spec, m, z, denominator)
    value = float(v @ geo.ricci @ v) - structure_sectional(spec, p, v, geo)
    if z.is_zero:
        return value
    flat = nabla_z_flat(spec, z, p)
    zv = z.value(spec, p)
    return value - float(v @ flat @ v) - float(zv @ geo.g @ v) ** 2 / denom


def bakry_emery_gradient(
    spec: ManifoldSpec, p, v, phi: ScalarField, geometry: Optional[PointGeometry] = None
) -> float:
    """(Ric⊥ + Hess φ)(v, v)"""
    p = np.asarray(p, dtype=float)
    geo = geometry or point_geometry(spec, p)
    v = np.asarray(v.components if isinstance(v, TangentVector) else v, dtype=float)
    require_unit(spec, geo.g, v)
    value = float(v @ geo.ricci @ v) - structure_sectional(spec, p, v, geo)
    return value + float(v @ hessian(spec, phi, p) @ v)


# ---------------------------------------------------------------------- 报告

@dataclass
class CurvatureReport:
    """一点处的全部曲率量"""
    manifold: str
    point: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    direction: Optional[np.ndarray] = None
    ricci_direction: Optional[float] = None
    holomorphic_sectional: Optional[float] = None
    quaternionic_sectional: Optional[float] = None
    orthogonal_ricci: Optional[OrthogonalRicci] = None
    bakry_emery_gradient: Optional[float] = None
    bakry_emery_mz: Optional[float] = None
    parameters: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        data = {
            "manifold": self.manifold,
            "point": self.point.tolist(),
            "christoffel": self.christoffel.tolist(),
            "riemann": self.riemann.tolist(),
            "ricci": self.ricci.tolist(),
            "scalar": self.scalar,
        }
        if self.direction is not None:
            data["direction"] = self.direction.tolist()
            data["ricci_direction"] = self.ricci_direction
        for key in ("holomorphic_sectional", "quaternionic_sectional", "bakry_emery_gradient", "bakry_emery_mz"):
            value = getattr(self, key)
            if value is not None:
                data[key] = value
        if self.orthogonal_ricci is not None:
            data["orthogonal_ricci"] = self.orthogonal_ricci.to_dict()
        if self.parameters:
            data["parameters"] = self.parameters
        return data

    def summary_rows(self) -> Dict[str, float]:
        """标量摘要 (CSV 与终端表格用)"""
        rows = {"scalar": self.scalar}
        if self.ricci_direction is not None:
            rows["ricci(v,v)"] = self.ricci_direction
        if self.holomorphic_sectional is not None:
            rows["H(v)"] = self.holomorphic_sectional
        if self.quaternionic_sectional is not None:
            rows["Q(v)"] = self.quaternionic_sectional
        if self.orthogonal_ricci is not None:
            rows["ric_perp_decomposition"] = self.orthogonal_ricci.via_decomposition
            rows["ric_perp_frame_sum"] = self.orthogonal_ricci.via_frame_sum
        if self.bakry_emery_gradient is not None:
            rows["ric_perp+hess_phi"] = self.bakry_emery_gradient
        if self.bakry_emery_mz is not None:
            rows["ric_perp_mz"] = self.bakry_emery_mz
        return rows


def curvature_report(
    spec: ManifoldSpec,
    p,
    v=None,
    phi: Optional[ScalarField] = None,
    m: Optional[float] = None,
    z: Optional[VectorField] = None,
    denominator: str = "real-dim",
) -> CurvatureReport:
    """
    汇总一点处的曲率量; 给出方向 v 时计算方向量 (v 须为单位向量)

    Raises:
        GeometryInputError: 零方向、非单位方向、m 与 Z 不相容
    """
    p = np.asarray(p, dtype=float)
    geo = point_geometry(spec, p)
    report = CurvatureReport(
        manifold=spec.name,
        point=p,
        christoffel=geo.gamma,
        riemann=geo.riemann,
        ricci=geo.ricci,
        scalar=float(geo.scalar),
    )
    if v is None:
        return report

    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise GeometryInputError("方向向量为零")
    require_unit(spec, geo.g, v)
    report.direction = v
    report.ricci_direction = float(v @ geo.ricci @ v)
    if spec.kind is ManifoldKind.RIEMANNIAN:
        return report
    if spec.kind is ManifoldKind.KAHLER:
        report.holomorphic_sectional = structure_sectional(spec, p, v, geo)
    else:
        report.quaternionic_sectional = structure_sectional(spec, p, v, geo)
    report.orthogonal_ricci = orthogonal_ricci(spec, p, v, geo)
    if phi is not None:
        report.bakry_emery_gradient = bakry_emery_gradient(spec, p, v, phi, geo)
        report.parameters["phi"] = phi.label
    if m is not None:
        report.bakry_emery_mz = bakry_emery_mz(spec, p, v, m, z, denominator, geo)
        report.parameters.update({"m": m, "Z": (z.label if z else "0"), "be_denominator": denominator})
    return report


__all__ = [
    "CurvatureReport",
    "BE_DENOMINATORS",
    "hessian_jet",
    "gradient_jet",
    "covariant_derivative",
    "gradient",
    "hessian",
    "laplacian",
    "orthogonal_laplacian",
    "lie_derivative_metric",
    "nabla_z_flat",
    "be_denominator",
    "bakry_emery_mz",
    "bakry_emery_gradient",
    "curvature_report",
    "metric_and_christoffel",
]
