"""
比较几何的闭式部分

𝔰(k,t) = sin(√k t) 与 𝔰′ = ∂_t𝔰, Laplace 比较右端, 各直径上界, Riccati 比较界
及其数值解, 两个积分引理的求积检查, 以及由采样测得的假设常数 k, C。
"""

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from scipy.integrate import simpson, solve_ivp

from kahler_toolkit.core.errors import GeometryInputError, NumericalError
from kahler_toolkit.core.logger import get_logger
from kahler_toolkit.geometry.calculus import be_denominator, hessian, nabla_z_flat
from kahler_toolkit.geometry.curvature import metric_and_christoffel, point_geometry
from kahler_toolkit.geometry.geodesics import BOUNDARY_TOL, GeodesicPath, Profile
from kahler_toolkit.geometry.manifold import ManifoldKind, ManifoldSpec, ScalarField, VectorField

logger = get_logger(__name__)

RICCATI_START = 1e-4
BLOWDOWN_LEVEL = -1e6
LEMMA_SLACK = 1e-8


class ModelKind(str, Enum):
    KAHLER = "kahler"
    QUATERNIONIC = "quaternionic"


class Flavor(str, Enum):
    GRADIENT_BOUNDED_PHI = "gradient_bounded_phi"
    GRADIENT_RICCATI = "gradient_riccati"
    NON_GRADIENT_MZ = "non_gradient_mZ"


QUATERNIONIC_VARIANTS = ("printed", "derived")
HYPOTHESIS_READINGS = ("proof", "printed")


# ---------------------------------------------------------------------- 𝔰 函数

def s_func(k: float, t):
    """𝔰(k, t) = sin(√k t)"""
    return np.sin(np.sqrt(k) * np.asarray(t, dtype=float))


def s_prime(k: float, t):
    """𝔰′(k, t) = √k cos(√k t)"""
    root = np.sqrt(k)
    return root * np.cos(root * np.asarray(t, dtype=float))


def s_ratio(k: float, t):
    """𝔰′/𝔰 = √k cot(√k t)"""
    return s_prime(k, t) / s_func(k, t)


# ---------------------------------------------------------------------- 模型

@dataclass(frozen=True)
class ComparisonModel:
    """
    比较模型

    k > 0; C ≥ 0; m 缺省为实维数; variant 只影响四元情形的常数,
    alpha 为 Riccati 参数 (缺省取 2√C)。
    """
    k: float
    n: int
    m: Optional[float] = None
    C: float = 0.0
    kind: ModelKind = ModelKind.KAHLER
    flavor: Flavor = Flavor.NON_GRADIENT_MZ
    variant: str = "printed"
    alpha: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "flavor", Flavor(self.flavor))
        if not self.k > 0:
            raise GeometryInputError(f"k 必须为正, 实际 {self.k}")
        if self.C < 0:
            raise GeometryInputError(f"C 必须非负, 实际 {self.C}")
        if self.n < 1:
            raise GeometryInputError(f"n 必须 ≥ 1, 实际 {self.n}")
        if self.variant not in QUATERNIONIC_VARIANTS:
            raise GeometryInputError(f"未知的四元常数读法 {self.variant}")
        if self.m is None:
            object.__setattr__(self, "m", float(self.real_dimension))
        if self.m < self.real_dimension:
            raise GeometryInputError(f"m = {self.m} 小于实维数 {self.real_dimension}")
        if self.alpha is not None and self.alpha < 0:
            raise GeometryInputError(f"alpha 必须非负, 实际 {self.alpha}")

    @property
    def real_dimension(self) -> int:
        return 2 * self.n if self.kind is ModelKind.KAHLER else 4 * self.n

    @property
    def free_dimension(self) -> int:
        """结构像之外的方向数: 2n−2 或 4n−4"""
        return self.real_dimension - (2 if self.kind is ModelKind.KAHLER else 4)

    @property
    def structure_constant(self) -> float:
        """H ≥ 4k 或 Q ≥ 12k 中的系数"""
        return 4.0 if self.kind is ModelKind.KAHLER else 12.0

    @property
    def barrier(self) -> float:
        """比较右端的第一个奇点"""
        if self.kind is ModelKind.QUATERNIONIC and self.variant == "printed":
            return math.pi / (2.0 * math.sqrt(3.0 * self.k))
        return math.pi / (2.0 * math.sqrt(self.k))

    def barriers(self) -> Dict[str, float]:
        """两种屏障约定 (四元情形二者不同)"""
        return {
            "pi/(2*sqrt(k))": math.pi / (2.0 * math.sqrt(self.k)),
            "pi/(2*sqrt(3k))": math.pi / (2.0 * math.sqrt(3.0 * self.k)),
        }

    def with_(self, **changes) -> "ComparisonModel":
        return replace(self, **changes)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["kind"] = self.kind.value
        data["flavor"] = self.flavor.value
        return data


def comparison_rhs(model: ComparisonModel, r):
    """
    ℒr 的比较上界

    凯勒: (m−2)𝔰′(k,r)/𝔰(k,r) + 𝔰′(4k,r)/𝔰(4k,r)
    四元: (m−4)𝔰′(k,r)/𝔰(k,r) + 3·𝔰′(c k,r)/𝔰(c k,r), printed 取 c = 12, derived 取 c = 4

    Raises:
        GeometryInputError: r 不在 (0, barrier) 内
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0) or np.any(r_arr >= model.barrier):
        raise GeometryInputError(f"r 必须在 (0, {model.barrier:.6f}) 内")
    k, m = model.k, model.m
    if model.kind is ModelKind.KAHLER:
        value = (m - 2.0) * s_ratio(k, r_arr) + s_ratio(4.0 * k, r_arr)
    else:
        factor = 12.0 if model.variant == "printed" else 4.0
        value = (m - 4.0) * s_ratio(k, r_arr) + 3.0 * s_ratio(factor * k, r_arr)
    return float(value) if np.ndim(value) == 0 else value


def _require_n(model: ComparisonModel) -> None:
    if model.n < 2:
        raise GeometryInputError(f"直径上界要求 n ≥ 2, 实际 n = {model.n}")


def diameter_bound(model: ComparisonModel) -> float:
    """
    各情形的直径上界

    gradient_bounded_phi: (π/√k)·√(1 + √2 C/(n−1)) (四元: 分母 2n−2)
    gradient_riccati:     (π/√((n−1)k))·√(2√C + n−1) (四元: √(√C + n−1))
    non_gradient_mZ:      π/(2√k) (四元 printed: π/(2√(3k)))
    """
    _require_n(model)
    k, n, c = model.k, model.n, model.C
    if model.flavor is Flavor.GRADIENT_BOUNDED_PHI:
        denom = (n - 1) if model.kind is ModelKind.KAHLER else (2 * n - 2)
        return math.pi / math.sqrt(k) * math.sqrt(1.0 + math.sqrt(2.0) * c / denom)
    if model.flavor is Flavor.GRADIENT_RICCATI:
        head = 2.0 * math.sqrt(c) if model.kind is ModelKind.KAHLER else math.sqrt(c)
        return math.pi / math.sqrt((n - 1) * k) * math.sqrt(head + n - 1)
    return model.barrier


# ---------------------------------------------------------------------- Riccati

def optimal_alpha(c: float) -> float:
    """使爆破点最小的 α = 2√C"""
    return 2.0 * math.sqrt(c)


def _alpha(model: ComparisonModel, alpha: Optional[float]) -> float:
    value = model.alpha if alpha is None else alpha
    if value is None:
        value = optimal_alpha(model.C)
    if value < 0 or (value == 0 and model.C > 0):
        raise GeometryInputError(f"C > 0 时要求 α > 0, 实际 α = {value}")
    return float(value)


def riccati_coefficients(model: ComparisonModel, alpha: Optional[float] = None) -> Dict[str, float]:
    """
    u′ ≤ −c₂u² − c₀ 的系数与 r→0⁺ 时 r·u 的极限

    c₂ = α/(α² + fα + 4C), c₀ = f·k, head = f + α/2, f = 2n−2 (四元 4n−4)
    """
    _require_n(model)
    a = _alpha(model, alpha)
    f = float(model.free_dimension)
    if a == 0.0:
        c2 = 1.0 / f
    else:
        c2 = a / (a * a + f * a + 4.0 * model.C)
    return {"alpha": a, "c2": c2, "c0": f * model.k, "head": f + 0.5 * a}


def riccati_blowdown(model: ComparisonModel, alpha: Optional[float] = None) -> float:
    """界的 cot 奇点 r* = π√(α² + fα + 4C)/√(α f k)"""
    coef = riccati_coefficients(model, alpha)
    return math.pi / math.sqrt(coef["c0"] * coef["c2"])


def riccati_bound(model: ComparisonModel, alpha: Optional[float], r):
    """
    Δ̃⊥r 的上界 √(f k (f + α + 4C/α))·cot(√(α f k/(α² + fα + 4C))·r)

    Raises:
        GeometryInputError: r 不在 (0, r*) 内
    """
    coef = riccati_coefficients(model, alpha)
    r_arr = np.asarray(r, dtype=float)
    pole = math.pi / math.sqrt(coef["c0"] * coef["c2"])
    if np.any(r_arr <= 0) or np.any(r_arr >= pole):
        raise GeometryInputError(f"r 必须在 (0, {pole:.6f}) 内")
    amplitude = math.sqrt(coef["c0"] / coef["c2"])
    value = amplitude / np.tan(math.sqrt(coef["c0"] * coef["c2"]) * r_arr)
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class RiccatiSolution:
    """u′ = −c₂u² − c₀ 的数值解 (稠密输出)"""
    model: ComparisonModel
    alpha: float
    r_start: float
    r_end: float
    blowdown: Optional[float]
    solution: object = field(repr=False)

    def __call__(self, r):
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr < self.r_start) or np.any(r_arr > self.r_end):
            raise GeometryInputError(f"r 必须在 [{self.r_start}, {self.r_end}] 内")
        value = self.solution.sol(r_arr)[0]
        return float(value) if np.ndim(value) == 0 else value

    def bound_margin(self, grid) -> np.ndarray:
        """riccati_bound − u, 在两者均有定义的网格点上"""
        grid = np.asarray(grid, dtype=float)
        return riccati_bound(self.model, self.alpha, grid) - self(grid)

    def to_dict(self) -> Dict:
        return {
            "alpha": self.alpha,
            "r_start": self.r_start,
            "r_end": self.r_end,
            "blowdown": self.blowdown,
            "predicted_blowdown": riccati_blowdown(self.model, self.alpha),
        }


def riccati_ode_solve(
    model: ComparisonModel, alpha: Optional[float] = None, r_max: Optional[float] = None
) -> RiccatiSolution:
    """
    从 r₀ = 1e-4 处的渐近值 u(r₀) = (f + α/2)/r₀ 积分 u′ = −c₂u² − c₀

    u 降到 −1e6 时终止, 终止点作为爆破位置报告 (不视为失败)。
    """
    if model.flavor is not Flavor.GRADIENT_RICCATI:
        raise GeometryInputError(f"Riccati 求解要求 gradient_riccati, 实际 {model.flavor.value}")
    coef = riccati_coefficients(model, alpha)
    c2, c0 = coef["c2"], coef["c0"]
    r_max = 1.2 * riccati_blowdown(model, alpha) if r_max is None else float(r_max)

    def rhs(_r, u):
        return -c2 * u * u - c0

    def blowdown(_r, u):
        return u[0] - BLOWDOWN_LEVEL

    blowdown.terminal = True
    blowdown.direction = -1

    solution = solve_ivp(
        rhs,
        (RICCATI_START, r_max),
        [coef["head"] / RICCATI_START],
        method="DOP853",
        rtol=1e-11,
        atol=1e-12,
        dense_output=True,
        events=blowdown,
    )
    if solution.status < 0:
        raise NumericalError(f"Riccati 积分失败: {solution.message}")
    hit = solution.t_events[0]
    blow = float(hit[0]) if len(hit) else None
    logger.debug(f"Riccati 解 α = {coef['alpha']:.4g}, 爆破点 {blow}")
    return RiccatiSolution(
        model=model,
        alpha=coef["alpha"],
        r_start=RICCATI_START,
        r_end=float(solution.t[-1]),
        blowdown=blow,
        solution=solution,
    )


# ---------------------------------------------------------------------- 比较报告

@dataclass(frozen=True)
class ComparisonReport:
    """r 网格上的 lhs (实测) 与 rhs (闭式), margin = rhs − lhs"""
    r: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    tolerance: float = 1e-4

    @property
    def margin(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margin))

    @property
    def equality(self) -> bool:
        return bool(np.all(np.abs(self.margin) < self.tolerance))

    @property
    def holds(self) -> bool:
        return self.worst_margin >= -self.tolerance

    def rows(self) -> List[Dict[str, float]]:
        return [
            {"r": float(r), "lhs": float(a), "rhs": float(b), "margin": float(b - a)}
            for r, a, b in zip(self.r, self.lhs, self.rhs)
        ]

    def to_dict(self) -> Dict:
        return {
            "samples": self.rows(),
            "worst_margin": self.worst_margin,
            "equality": self.equality,
            "holds": self.holds,
            "tolerance": self.tolerance,
        }


# ---------------------------------------------------------------------- 积分引理

@dataclass(frozen=True)
class LemmaCheck:
    """积分引理的两端"""
    name: str
    lhs: float
    rhs: float
    C: float
    length: float
    factor: float = 1.0
    derived_rhs: Optional[float] = None

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + LEMMA_SLACK

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["holds"] = self.holds
        data["margin"] = self.margin
        if self.derived_rhs is not None:
            data["holds_derived"] = self.lhs <= self.derived_rhs + LEMMA_SLACK
        return data


def _profile_samples(profile: Profile, path: GeodesicPath):
    t = path.t
    f = np.asarray(profile.fn(t), dtype=float)
    df = np.asarray(profile.derivative(t), dtype=float)
    violation = max(abs(f[0]), abs(f[-1]))
    if violation > BOUNDARY_TOL:
        raise GeometryInputError(f"剖面 {profile.name} 不满足 f(0) = f(l) = 0, |f| = {violation:.3e}")
    ddf = np.gradient(df, t) if profile.second is None else np.asarray(profile.second(t), dtype=float)
    return t, f, df, ddf


def _sample_cloud(spec: ManifoldSpec, path: GeodesicPath, samples: int, seed: int) -> np.ndarray:
    from kahler_toolkit.geometry.catalog import sample_points

    rng = np.random.default_rng(seed)
    extra = sample_points(spec, rng, samples) if samples > 0 else np.empty((0, spec.dimension))
    return np.vstack([path.x, extra])


def _measured_bound(label: str, values: np.ndarray, claimed: Optional[float]) -> float:
    measured = float(np.max(values))
    if claimed is None:
        return measured
    if measured > claimed + 1e-12:
        raise GeometryInputError(f"{label} 采样最大值 {measured:.6g} 超过给定的 C = {claimed:.6g}")
    return float(claimed)


def gradient_lemma_check(
    spec: ManifoldSpec,
    phi: ScalarField,
    path: GeodesicPath,
    profile: Profile,
    C: Optional[float] = None,
    samples: int = 64,
    seed: int = 0,
) -> LemmaCheck:
    """
    ∫ f² Hess φ(γ̇,γ̇) dt ≤ 2C√l (∫ ((f f′)′)² dt)^{1/2}, |φ| ≤ C 由采样核对

    Raises:
        GeometryInputError: 剖面边界条件不满足或采样超出 C
    """
    t, f, df, ddf = _profile_samples(profile, path)
    cloud = _sample_cloud(spec, path, samples, seed)
    bound = _measured_bound("|φ|", np.abs(phi.value(spec, cloud)), C)

    x = spec.coordinates(path.x, 2)
    jet = phi.jet_fn(x)
    gamma = metric_and_christoffel(spec, spec.coordinates(path.x, 1))[2].v
    hess = jet.derivative(2) - np.einsum("...kab,...k->...ab", gamma, jet.derivative(1))
    along = np.einsum("ta,tab,tb->t", path.v, hess, path.v)

    lhs = float(simpson(f**2 * along, x=t))
    rhs = 2.0 * bound * math.sqrt(path.length) * math.sqrt(float(simpson((df**2 + f * ddf) ** 2, x=t)))
    return LemmaCheck("gradient", lhs, rhs, bound, path.length)


def lie_lemma_check(
    spec: ManifoldSpec,
    field_v: VectorField,
    path: GeodesicPath,
    profile: Profile,
    C: Optional[float] = None,
    factor: float = 1.0,
    samples: int = 64,
    seed: int = 0,
) -> LemmaCheck:
    """
    ∫ f² ℒ_V g(γ̇,γ̇) dt ≤ factor·C√l (∫ f² f′² dt)^{1/2}, |V| ≤ C 由采样核对

    同时给出分部积分可证的常数 4 对应的右端 derived_rhs
    """
    if factor <= 0:
        raise GeometryInputError(f"lie_lemma_factor 必须为正, 实际 {factor}")
    t, f, df, _ = _profile_samples(profile, path)
    cloud = _sample_cloud(spec, path, samples, seed)
    values = field_v.value(spec, cloud)
    g_cloud = spec.metric(cloud)
    norms = np.sqrt(np.einsum("ta,tab,tb->t", values, g_cloud, values))
    bound = _measured_bound("|V|", norms, C)

    x = spec.coordinates(path.x, 1)
    g_jet = spec.metric_fn(x)
    v_jet = field_v.jet_fn(x)
    g, dg = g_jet.v, g_jet.derivative(1)
    zv, dz = v_jet.v, v_jet.derivative(1)
    lie = (
        np.einsum("...k,...ijk->...ij", zv, dg)
        + np.einsum("...kj,...ki->...ij", g, dz)
        + np.einsum("...ik,...kj->...ij", g, dz)
    )
    along = np.einsum("ta,tab,tb->t", path.v, lie, path.v)

    lhs = float(simpson(f**2 * along, x=t))
    scale = bound * math.sqrt(path.length) * math.sqrt(float(simpson(f**2 * df**2, x=t)))
    return LemmaCheck("lie", lhs, factor * scale, bound, path.length, factor, 4.0 * scale)


# ---------------------------------------------------------------------- 假设常数

@dataclass(frozen=True)
class MeasuredConstants:
    """
    采样测得的假设常数

    k 为所有采样方向上可容许的最大 k (两项取小); vacuous 表示 Ric⊥ 项系数为零
    """
    k: float
    k_ricci: float
    k_structure: Optional[float]
    C: Optional[float]
    points: int
    directions: int
    reading: str
    vacuous: bool = False
    worst_point: List[float] = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return self.k > 0

    def to_dict(self) -> Dict:
        return asdict(self)


def hypothesis_coefficient(model: ComparisonModel, reading: str) -> float:
    """Ric⊥_{m,Z} ≥ coefficient·k 中的系数 (梯度情形为 f)"""
    if reading not in HYPOTHESIS_READINGS:
        raise GeometryInputError(f"未知的假设读法 {reading}")
    if model.flavor is not Flavor.NON_GRADIENT_MZ:
        return float(model.free_dimension)
    offset = 2.0 if model.kind is ModelKind.KAHLER else 4.0
    if reading == "proof":
        return model.m - offset
    return offset * model.m - offset


def _unit_directions(g: np.ndarray, rng: np.random.Generator, count: int) -> np.ndarray:
    """坐标轴方向加 count 个随机方向, 均按 g 归一"""
    w = np.vstack([np.eye(g.shape[-1]), rng.standard_normal((count, g.shape[-1]))])
    return w / np.sqrt(np.einsum("ai,ij,aj->a", w, g, w))[:, None]


def _curvature_pair(riemann: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """R(u_a, w_a, w_a, u_a), 按行批量"""
    rw = np.einsum("ijkl,aj,ak->ail", riemann, w, w)
    return np.einsum("ai,ail,al->a", u, rw, u)


def measure_constants(
    spec: ManifoldSpec,
    model: ComparisonModel,
    points,
    reading: str = "proof",
    z: Optional[VectorField] = None,
    phi: Optional[ScalarField] = None,
    base=None,
    directions: int = 200,
    seed: int = 0,
    denominator: str = "real-dim",
) -> MeasuredConstants:
    """
    在每个点取坐标轴方向与 directions 个随机单位方向, 求可容许的最大 k 以及 C

    non_gradient_mZ: k ≤ Ric⊥_{m,Z}(v,v)/coef 且 k ≤ H(v)/4 (四元 Q(v)/12);
    gradient_*:      k ≤ (Ric⊥ + Hess φ)(v,v)/f;
    C: bounded_phi 取 max|φ|, riccati 取 max |∇φ|²·r (r 为到 base 的距离, 需闭式距离)。
    """
    if spec.kind is ManifoldKind.RIEMANNIAN:
        raise GeometryInputError(f"{spec.name} 是黎曼流形, 没有正交Ricci曲率")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    coefficient = hypothesis_coefficient(model, reading)
    vacuous = coefficient <= 0
    z = z or VectorField.zero()
    denom = None
    if model.flavor is Flavor.NON_GRADIENT_MZ:
        denom = be_denominator(spec, model.m, z, denominator)

    rng = np.random.default_rng(seed)
    geo_all = point_geometry(spec, points)
    k_ricci, k_structure = np.inf, np.inf
    worst, worst_value = points[0], np.inf
    c_values = []
    for idx, p in enumerate(points):
        g, ricci, riemann = geo_all.g[idx], geo_all.ricci[idx], geo_all.riemann[idx]
        vs = _unit_directions(g, rng, directions)
        structure = np.zeros(len(vs))
        for mat in spec.structure_matrices(p):
            structure += _curvature_pair(riemann, vs, vs @ mat.T)
        perp = np.einsum("ai,ij,aj->a", vs, ricci, vs) - structure

        if model.flavor is Flavor.NON_GRADIENT_MZ:
            if not z.is_zero:
                flat = nabla_z_flat(spec, z, p)
                zg = g @ z.value(spec, p)
                perp = perp - np.einsum("ai,ij,aj->a", vs, flat, vs) - (vs @ zg) ** 2 / denom
            local_structure = float(np.min(structure)) / model.structure_constant
            k_structure = min(k_structure, local_structure)
        else:
            if phi is None:
                raise GeometryInputError("梯度情形需要 φ")
            perp = perp + np.einsum("ai,ij,aj->a", vs, hessian(spec, phi, p), vs)
            local_structure = np.inf

        local_ricci = np.inf if vacuous else float(np.min(perp)) / coefficient
        k_ricci = min(k_ricci, local_ricci)
        local = min(local_ricci, local_structure)
        if local < worst_value:
            worst, worst_value = p, local

        if phi is not None and model.flavor is Flavor.GRADIENT_BOUNDED_PHI:
            c_values.append(abs(float(phi.value(spec, p))))
        elif phi is not None and model.flavor is Flavor.GRADIENT_RICCATI:
            c_values.append(_riccati_c(spec, phi, p, base))

    k_struct_out = None if model.flavor is not Flavor.NON_GRADIENT_MZ else float(k_structure)
    k = min(k_ricci, k_structure)
    measured = MeasuredConstants(
        k=float(k),
        k_ricci=float(k_ricci),
        k_structure=k_struct_out,
        C=float(max(c_values)) if c_values else None,
        points=len(points),
        directions=directions,
        reading=reading,
        vacuous=bool(vacuous),
        worst_point=[float(c) for c in worst],
    )
    logger.debug(f"{spec.name} 测得 k = {measured.k:.6g} ({reading})")
    return measured


def _riccati_c(spec: ManifoldSpec, phi: ScalarField, p: np.ndarray, base) -> float:
    """|∇φ|²·r(p)"""
    if base is None or spec.distance_jet_fn is None:
        raise GeometryInputError("gradient_riccati 的 C 需要基点与闭式距离")
    base = np.asarray(base, dtype=float)
    if np.array_equal(base, p):
        return 0.0
    r = float(spec.distance_jet_fn(base, spec.coordinates(p, 0)).v)
    jet = phi.jet(spec, p, 1)
    dphi = jet.derivative(1)
    return float(dphi @ np.linalg.solve(spec.metric(p), dphi)) * r


__all__ = [
    "ModelKind",
    "Flavor",
    "QUATERNIONIC_VARIANTS",
    "HYPOTHESIS_READINGS",
    "ComparisonModel",
    "ComparisonReport",
    "RiccatiSolution",
    "LemmaCheck",
    "MeasuredConstants",
    "s_func",
    "s_prime",
    "s_ratio",
    "comparison_rhs",
    "diameter_bound",
    "optimal_alpha",
    "riccati_coefficients",
    "riccati_blowdown",
    "riccati_bound",
    "riccati_ode_solve",
    "gradient_lemma_check",
    "lie_lemma_check",
    "hypothesis_coefficient",
    "measure_constants",
]
