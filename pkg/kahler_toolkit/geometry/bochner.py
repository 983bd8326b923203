"""
修正Bochner公式的逐项计算

在点 q 处用纯Jet流水线计算 (f 取三阶Jet, 度量取二阶):

    ½ Σ_{i>r} E_i E_i |∇f|²  =  Ric⊥(∇f,∇f) + ∇f(Δ⊥f)
                               + Σ_{i>r} g(∇_{∇f}∇f, ∇_{E_i}E_i)
                               + Σ_{i>r} (|∇_{E_i}∇f|² − c·g(∇_{∇f}E_i, ∇_{E_i}∇f))

r = 2 (凯勒) 或 4 (四元凯勒), c = 2。标架场: E_1 = ∇f/|∇f|, 结构像, 其余由坐标场
的 Gram–Schmidt 构造 (作为Jet, 因而带有导数); 跳过模式在 q 点判定。
四元情形另有按字面读法的形式: 左端取 ½ Σ Hess(|∇f|²)(E_i,E_i), c = 1。
"""

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from kahler_toolkit.core.errors import FrameError, GeometryInputError
from kahler_toolkit.geometry.calculus import covariant_derivative, gradient_jet, hessian_jet
from kahler_toolkit.geometry.curvature import GS_SKIP, curvature_form, metric_and_christoffel, point_geometry
from kahler_toolkit.geometry.jet import Jet, einsum, inner, matvec
from kahler_toolkit.geometry.manifold import ManifoldKind, ManifoldSpec, ScalarField

UNIT_GRADIENT_TOL = 1e-8

QUATERNIONIC_FORMS = ("derived", "printed")


@dataclass(frozen=True)
class BochnerTerms:
    """Bochner 公式在一点处的各项"""
    frame: str
    lhs: float
    ric_perp: float
    gradient_term: float
    acceleration_term: float
    correction_term: float
    orthogonal_laplacian: float
    hessian_norm: float
    transport_term: float = 0.0
    vacuous: bool = False

    @property
    def rhs(self) -> float:
        return self.ric_perp + self.gradient_term + self.acceleration_term + self.correction_term

    @property
    def residual(self) -> float:
        return self.lhs - self.rhs

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["rhs"] = self.rhs
        data["residual"] = self.residual
        return data


def frame_fields(
    spec: ManifoldSpec,
    g: Jet,
    structures: Sequence[Jet],
    e1: Jet,
    completion: Sequence[int],
) -> List[Jet]:
    """适配标准正交标架场 (Jet), 前 len(structures)+1 个为 E_1 及其结构像"""
    d = spec.dimension
    fields = [e1] + [matvec(s, e1) for s in structures]
    for idx in completion:
        if len(fields) == d:
            break
        basis = np.zeros(d)
        basis[idx] = 1.0
        w = Jet.constant(basis, e1.dim, e1.order)
        for _ in range(2):
            for e in fields:
                w = w - e * inner(g, e, w).reshape_value(e.shape[:-1] + (1,))
        norm2 = inner(g, w, w)
        if np.sqrt(max(float(norm2.v), 0.0)) < GS_SKIP:
            continue
        fields.append(w * norm2.power(-0.5).reshape_value((1,)))
    if len(fields) != d:
        raise FrameError(f"标架场补全失败: {len(fields)}/{d}")
    return fields


def bochner_terms(
    spec: ManifoldSpec,
    f: ScalarField,
    q,
    completion: Optional[Sequence[int]] = None,
    quaternionic_form: str = "derived",
    label: str = "index-order",
) -> BochnerTerms:
    """
    计算 q 点处 Bochner 公式各项

    Raises:
        GeometryInputError: |∇f(q)| ≠ 1 或黎曼流形
        FrameError: 标架场退化
    """
    if spec.kind is ManifoldKind.RIEMANNIAN:
        raise GeometryInputError(f"{spec.name} 是黎曼流形, 修正Bochner公式不适用")
    if quaternionic_form not in QUATERNIONIC_FORMS:
        raise GeometryInputError(f"未知的四元公式读法: {quaternionic_form}")
    q = np.asarray(q, dtype=float)
    d = spec.dimension
    completion = list(range(d)) if completion is None else list(completion)

    x = spec.coordinates(q, 3)
    f_jet = f.jet_fn(x)
    g, ginv, gamma = metric_and_christoffel(spec, x)  # 二阶
    grad = gradient_jet(f_jet, ginv)  # 二阶
    u = inner(g, grad, grad)  # |∇f|², 二阶
    if abs(float(u.v) - 1.0) > UNIT_GRADIENT_TOL:
        raise GeometryInputError(f"要求 |∇f(q)| = 1, 实际 |∇f|² = {float(u.v):.12f}")

    # 一阶即可的标架场与 Hessian
    g1, grad1, gamma1 = g.truncate(1), grad.truncate(1), gamma.truncate(1)
    structures = [s.truncate(1) for s in (fn(x) for fn in spec.structure_fns)]
    e1 = grad1 * inner(g1, grad1, grad1).power(-0.5).reshape_value((1,))
    fields = frame_fields(spec, g1, structures, e1, completion)
    rank = len(structures) + 1
    hess = hessian_jet(f_jet, gamma1)  # 一阶
    lap = einsum("...ab,...ab->...", ginv.truncate(1), hess)
    perp = lap
    for e in fields[:rank]:
        perp = perp - einsum("...a,...ab,...b->...", e, hess, e)

    geo = point_geometry(spec, q)
    gam = gamma.v
    gradient_v = grad.v
    du, ddu = u.derivative(1), u.derivative(2)
    accel = covariant_derivative(gam, gradient_v, grad1)

    printed = spec.kind is ManifoldKind.QUATERNIONIC and quaternionic_form == "printed"
    coefficient = 1.0 if printed else 2.0

    lhs = ric_perp = acceleration = correction = hessian_norm = transport = 0.0
    for e in fields[rank:]:
        ev = e.v
        nabla_e_e = covariant_derivative(gam, ev, e)
        if printed:
            lhs += 0.5 * float(ev @ ddu @ ev - np.einsum("kab,a,b,k->", gam, ev, ev, du))
        else:
            lhs += 0.5 * float(ev @ ddu @ ev + (e.derivative(1) @ ev) @ du)
        ric_perp += curvature_form(geo.riemann, ev, gradient_v, gradient_v, ev)
        acceleration += float(accel @ geo.g @ nabla_e_e)
        nabla_e_grad = covariant_derivative(gam, ev, grad1)
        nabla_grad_e = covariant_derivative(gam, gradient_v, e)
        sq = float(nabla_e_grad @ geo.g @ nabla_e_grad)
        mixed = float(nabla_grad_e @ geo.g @ nabla_e_grad)
        hessian_norm += sq
        transport += mixed
        correction += sq - coefficient * mixed

    gradient_term = float(perp.derivative(1) @ gradient_v)
    return BochnerTerms(
        frame=label,
        lhs=lhs,
        ric_perp=ric_perp,
        gradient_term=gradient_term,
        acceleration_term=acceleration,
        correction_term=correction,
        orthogonal_laplacian=float(perp.v),
        hessian_norm=hessian_norm,
        transport_term=transport,
        vacuous=len(fields) == rank,
    )


def bochner_terms_two_frames(
    spec: ManifoldSpec, f: ScalarField, q, quaternionic_form: str = "derived"
) -> List[BochnerTerms]:
    """两种标架构造 (坐标下标正序与逆序补全) 下的各项"""
    d = spec.dimension
    return [
        bochner_terms(spec, f, q, list(range(d)), quaternionic_form, "index-order"),
        bochner_terms(spec, f, q, list(reversed(range(d))), quaternionic_form, "reversed-order"),
    ]


def modified_bochner_margin(terms: BochnerTerms, rank: int, dimension: int) -> float:
    """
    f = r 时 0 ≥ Ric⊥(∇r,∇r) + ∇r(Δ⊥r) + (Δ⊥r)²/(d − rank) 的余量 (非负即成立)
    """
    free = dimension - rank
    if free <= 0:
        return 0.0
    value = terms.ric_perp + terms.gradient_term + terms.orthogonal_laplacian**2 / free
    return -value


__all__ = [
    "BochnerTerms",
    "QUATERNIONIC_FORMS",
    "frame_fields",
    "bochner_terms",
    "bochner_terms_two_frames",
    "modified_bochner_margin",
]
