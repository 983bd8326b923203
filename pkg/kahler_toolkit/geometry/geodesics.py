"""
测地线

RK4 积分测地线方程 ẍ^k + Γ^k_ij ẋ^i ẋ^j = 0, 可同步平行移动标架或积分 Jacobi 场;
打靶法求距离, 距离函数 r = d(p, ·) 的各阶导数, 以及沿测地线的指标形式求积。

所有批量积分的状态数组第一维为批量维, 定义域之外的批量元素冻结在最后一个合法位置。
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import simpson
from scipy.stats import norm, qmc

from kahler_toolkit.core.errors import (
    ChartDomainError,
    GeometryInputError,
    NumericalError,
    QuadratureError,
    ShootingError,
    StepUnderflowError,
)
from kahler_toolkit.core.logger import get_logger
from kahler_toolkit.geometry.curvature import adapted_frame, christoffel, point_geometry
from kahler_toolkit.geometry.manifold import (
    UNIT_TOL,
    ManifoldSpec,
    OrthonormalFrame,
    VectorField,
)

logger = get_logger(__name__)

MAX_STEP = 1e-3
MIN_STEPS = 2000
SPEED_DRIFT_TOL = 1e-8
MAX_HALVINGS = 6

SWEEP_STEPS = 128
SWEEP_CANDIDATES = 3
COARSE_STEPS = 200
COARSE_ITERATIONS = 15
POLISH_ITERATIONS = 8
SHOOTING_TOL = 1e-7

JACOBI_STEPS = 400
CUT_FRACTION = 0.95
BOUNDARY_TOL = 1e-9
STENCIL_STEP = 1e-2
CURVATURE_CHUNK = 256

RADIAL_ROUTES = ("jacobi", "stencil", "closed-form")

State = List[np.ndarray]
Rates = Callable[[State], State]


# ---------------------------------------------------------------------- 数据类型

@dataclass(frozen=True)
class GeodesicPath:
    """
    单位速度测地线的采样

    t 严格递增, x / v 形状 (N+1, d); speed_drift = max |g(γ̇,γ̇) − 1|;
    endpoint_error 只在打靶求解时给出。
    """
    spec_name: str
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    h: float
    speed_drift: float
    endpoint_error: Optional[float] = None

    @property
    def length(self) -> float:
        return float(self.t[-1])

    @property
    def steps(self) -> int:
        return len(self.t) - 1

    @property
    def start(self) -> np.ndarray:
        return self.x[0]

    @property
    def end(self) -> np.ndarray:
        return self.x[-1]

    def with_endpoint_error(self, error: float) -> "GeodesicPath":
        return GeodesicPath(self.spec_name, self.t, self.x, self.v, self.h, self.speed_drift, error)

    def to_rows(self) -> List[Dict[str, float]]:
        """CSV 行: t, x1..xd, v1..vd"""
        d = self.x.shape[-1]
        rows = []
        for i, t in enumerate(self.t):
            row = {"t": float(t)}
            row.update({f"x{k + 1}": float(self.x[i, k]) for k in range(d)})
            row.update({f"v{k + 1}": float(self.v[i, k]) for k in range(d)})
            rows.append(row)
        return rows

    def summary(self) -> Dict:
        return {
            "manifold": self.spec_name,
            "length": self.length,
            "steps": self.steps,
            "h": self.h,
            "speed_drift": self.speed_drift,
            "endpoint_error": self.endpoint_error,
        }


@dataclass(frozen=True)
class TransportedFrame:
    """沿测地线平行移动的标架, frames 形状 (N+1, m, d)"""
    path: GeodesicPath
    frames: np.ndarray

    def at(self, index: int) -> OrthonormalFrame:
        return OrthonormalFrame(self.path.x[index], self.frames[index])

    def orthonormality_drift(self, spec: ManifoldSpec) -> float:
        g = spec.metric(self.path.x)
        gram = np.einsum("tai,tij,tbj->tab", self.frames, g, self.frames)
        eye = np.eye(self.frames.shape[1])
        return float(np.max(np.abs(gram - eye)))

    def structure_defect(self, spec: ManifoldSpec, source: int = 0, target: int = 1, structure: int = 0) -> float:
        """max_t |E_target − S E_source|, S 为第 structure 个结构张量"""
        mats = spec.structures(self.path.x, 0)[structure].v
        image = np.einsum("tij,tj->ti", mats, self.frames[:, source])
        return float(np.max(np.abs(self.frames[:, target] - image)))


@dataclass(frozen=True)
class JacobiSolution:
    """
    沿测地线的 Jacobi 场

    a[t, :, j] 为 J_j(0) = 0, J_j'(0) = E_j 的 Jacobi 场在平行标架下的分量
    """
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    frames: np.ndarray
    a: np.ndarray
    a_prime: np.ndarray

    def shape_operator(self, index: int = -1) -> np.ndarray:
        """γ̇ 正交补上的 A′A⁻¹ (平行标架分量, 已对称化)"""
        s = _shape_from(self.a[index], self.a_prime[index])
        return s


@dataclass(frozen=True)
class DistanceResult:
    """打靶法距离"""
    value: float
    path: GeodesicPath
    initial_velocity: np.ndarray
    candidates: int

    def to_dict(self) -> Dict:
        return {
            "value": self.value,
            "initial_velocity": self.initial_velocity.tolist(),
            "candidates": self.candidates,
            **{f"path_{k}": v for k, v in self.path.summary().items()},
        }


@dataclass(frozen=True)
class RadialDerivatives:
    """r = d(p, ·) 在 x 处的导数"""
    point: np.ndarray
    distance: float
    grad: np.ndarray
    hess: np.ndarray
    laplacian: float
    orthogonal_laplacian: float
    drift: Optional[float]
    route: str
    unit_error: float
    endpoint_error: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "point": self.point.tolist(),
            "distance": self.distance,
            "grad": self.grad.tolist(),
            "hess": self.hess.tolist(),
            "laplacian": self.laplacian,
            "orthogonal_laplacian": self.orthogonal_laplacian,
            "drift": self.drift,
            "route": self.route,
            "unit_error": self.unit_error,
            "endpoint_error": self.endpoint_error,
        }


@dataclass(frozen=True)
class Profile:
    """标量剖面函数 f(t) 及其导数"""
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    flagged: bool = False
    description: str = ""
    second: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def scaled(self, factor: float) -> "Profile":
        return Profile(
            name=self.name,
            fn=lambda t: factor * self.fn(t),
            derivative=lambda t: factor * self.derivative(t),
            second=None if self.second is None else (lambda t: factor * self.second(t)),
            flagged=self.flagged,
            description=f"{factor:g}·{self.description or self.name}",
        )


@dataclass(frozen=True)
class IndexFormValue:
    index: int
    value: float
    integrand: np.ndarray = field(repr=False)
    description: str = ""
    flagged: bool = False

    def to_dict(self) -> Dict:
        return {
            "index": self.index,
            "value": self.value,
            "description": self.description,
            "flagged": self.flagged,
        }


@dataclass(frozen=True)
class IndexFormReport:
    """各下标的指标形式值与 Σ_{i ≥ aggregate_from} 汇总"""
    profile: str
    length: float
    values: List[IndexFormValue]
    aggregate: float
    aggregate_from: int
    boundary_violation: float
    flagged: bool

    def value(self, index: int) -> float:
        for item in self.values:
            if item.index == index:
                return item.value
        raise KeyError(index)

    def to_dict(self) -> Dict:
        return {
            "profile": self.profile,
            "length": self.length,
            "values": [v.to_dict() for v in self.values],
            "aggregate": self.aggregate,
            "aggregate_from": self.aggregate_from,
            "boundary_violation": self.boundary_violation,
            "flagged": self.flagged,
        }


# ---------------------------------------------------------------------- RK4 核心

def _scaled(h: np.ndarray, arr: np.ndarray) -> np.ndarray:
    return h.reshape(h.shape + (1,) * (arr.ndim - h.ndim)) * arr


def _mask(flags: np.ndarray, arr: np.ndarray) -> np.ndarray:
    return flags.reshape(flags.shape + (1,) * (arr.ndim - flags.ndim))


def _rk4_step(rates: Rates, state: State, h: np.ndarray) -> State:
    k1 = rates(state)
    k2 = rates([s + _scaled(0.5 * h, k) for s, k in zip(state, k1)])
    k3 = rates([s + _scaled(0.5 * h, k) for s, k in zip(state, k2)])
    k4 = rates([s + _scaled(h, k) for s, k in zip(state, k3)])
    return [
        s + _scaled(h / 6.0, a + 2.0 * b + 2.0 * c + e)
        for s, a, b, c, e in zip(state, k1, k2, k3, k4)
    ]


def _guarded_rk4_step(rates: Rates, state: State, h: np.ndarray, alive: np.ndarray) -> Tuple[State, np.ndarray]:
    """
    只对 alive 元素做一步 RK4; 中间级出现退化度量或定义域错误的元素记为失败, 保持原状态

    先整批计算, 出错时逐元素重算以找出失败者。
    """
    new = [s.copy() for s in state]
    failed = np.zeros(alive.shape, dtype=bool)
    idx = np.flatnonzero(alive)
    if idx.size == 0:
        return new, failed
    try:
        out = _rk4_step(rates, [s[idx] for s in state], h[idx])
    except NumericalError:
        out = None
    if out is not None:
        for n, o in zip(new, out):
            n[idx] = o
        return new, failed
    for i in idx:
        try:
            one = _rk4_step(rates, [s[i : i + 1] for s in state], h[i : i + 1])
        except NumericalError:
            failed[i] = True
            continue
        for n, o in zip(new, one):
            n[i] = o[0]
    return new, failed


def _geodesic_rates(spec: ManifoldSpec) -> Rates:
    """状态 [x, v] 或 [x, v, E]"""
    def rates(state: State) -> State:
        x, v = state[0], state[1]
        gam = christoffel(spec, x)
        out = [v, -np.einsum("...kij,...i,...j->...k", gam, v, v)]
        if len(state) > 2:
            out.append(-np.einsum("...kij,...i,...aj->...ak", gam, v, state[2]))
        return out
    return rates


def _jacobi_rates(spec: ManifoldSpec) -> Rates:
    """状态 [x, v, E, A, A′], A″ = −K A, K_ac = R(E_a, γ̇, γ̇, E_c)"""
    def rates(state: State) -> State:
        x, v, e, a, b = state
        geo = point_geometry(spec, x)
        gam = geo.gamma
        acc = -np.einsum("...kij,...i,...j->...k", gam, v, v)
        de = -np.einsum("...kij,...i,...aj->...ak", gam, v, e)
        rv = np.einsum("...ijkl,...j,...k->...il", geo.riemann, v, v)
        k = np.einsum("...ai,...il,...cl->...ac", e, rv, e)
        return [v, acc, de, b, -(k @ a)]
    return rates


def _integrate(
    spec: ManifoldSpec,
    rates: Rates,
    state: State,
    span: np.ndarray,
    steps: int,
    record: bool = False,
    strict: bool = True,
) -> Tuple[State, Optional[List[np.ndarray]], np.ndarray]:
    """
    固定步数 RK4, 每个批量元素步长 span/steps

    strict 时离开定义域抛出 ChartDomainError (partial_path 为已积分的状态序列);
    否则该元素冻结, 以 alive 掩码返回。非 strict 时中间级的度量退化也只冻结出错的元素
    (批量维度须为一维)。
    """
    h = np.asarray(span, dtype=float) / steps
    alive = np.ones(h.shape, dtype=bool)
    state = [np.array(s, dtype=float) for s in state]
    history = [[s.copy()] for s in state] if record else None

    for step in range(steps):
        if strict:
            new = _rk4_step(rates, state, np.where(alive, h, 0.0))
            inside = spec.in_domain(new[0])
        else:
            new, failed = _guarded_rk4_step(rates, state, h, alive)
            inside = spec.in_domain(new[0]) & ~failed
        for s in new:
            inside &= np.all(np.isfinite(s.reshape(len(s), -1)), axis=-1)
        lost = alive & ~inside
        if lost.any():
            if strict:
                partial = [np.stack(hs) for hs in history] if history else None
                raise ChartDomainError(
                    f"测地线在第 {step + 1}/{steps} 步离开坐标卡定义域", partial_path=partial
                )
            new = [np.where(_mask(lost, s), old, s) for s, old in zip(new, state)]
            alive &= ~lost
        state = new
        if history is not None:
            for hs, s in zip(history, state):
                hs.append(s.copy())

    stacked = [np.stack(hs) for hs in history] if history else None
    return state, stacked, alive


def _as_batch(arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    return arr[None] if arr.ndim == 1 else arr


def geodesic_endpoints(
    spec: ManifoldSpec, points, velocities, spans, steps: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    批量积分 (速度不必为单位), 返回末端位置、速度与仍在定义域内的掩码
    """
    points, velocities = _as_batch(points), _as_batch(velocities)
    spans = np.broadcast_to(np.asarray(spans, dtype=float), points.shape[:1])
    state, _, alive = _integrate(
        spec, _geodesic_rates(spec), [points, velocities], spans, steps, strict=False
    )
    return state[0], state[1], alive


# ---------------------------------------------------------------------- 测地线

def _unit_check(spec: ManifoldSpec, p: np.ndarray, v: np.ndarray) -> None:
    norm2 = float(v @ spec.metric(p) @ v)
    if norm2 == 0.0:
        raise GeometryInputError("初速度为零")
    if abs(norm2 - 1.0) > UNIT_TOL:
        raise GeometryInputError(f"初速度需为单位向量, |g(v,v) − 1| = {abs(norm2 - 1.0):.3e}")


def _speed_drift(spec: ManifoldSpec, xs: np.ndarray, vs: np.ndarray) -> float:
    g = spec.metric(xs)
    speed = np.einsum("ti,tij,tj->t", vs, g, vs)
    return float(np.max(np.abs(speed - 1.0)))


def _make_path(spec: ManifoldSpec, xs: np.ndarray, vs: np.ndarray, length: float, steps: int) -> GeodesicPath:
    return GeodesicPath(
        spec_name=spec.name,
        t=np.linspace(0.0, length, steps + 1),
        x=xs,
        v=vs,
        h=length / steps,
        speed_drift=_speed_drift(spec, xs, vs),
    )


def integrate_geodesic(
    spec: ManifoldSpec, p, v_unit, length: float, h: Optional[float] = None
) -> GeodesicPath:
    """
    积分单位速度测地线

    默认步长 h = min(1e-3, l/2000); 速度漂移超过 1e-8 时步长减半重积分。

    Raises:
        GeometryInputError: 非单位初速度、非正长度或起点不在定义域
        ChartDomainError: 路径离开坐标卡 (携带已积分部分)
        StepUnderflowError: 多次减半后漂移仍超标
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v_unit, dtype=float)
    if length <= 0:
        raise GeometryInputError(f"测地线长度需为正, 实际 {length}")
    if not bool(spec.in_domain(p)):
        raise GeometryInputError(f"起点 {p.tolist()} 不在 {spec.name} 的坐标卡内")
    _unit_check(spec, p, v)

    step = min(MAX_STEP, length / MIN_STEPS) if h is None else float(h)
    for _ in range(MAX_HALVINGS + 1):
        steps = max(1, int(math.ceil(length / step - 1e-9)))
        try:
            _, history, _ = _integrate(
                spec, _geodesic_rates(spec), [p[None], v[None]], np.array([length]), steps, record=True
            )
        except ChartDomainError as exc:
            partial = exc.partial_path
            path = None
            if partial:
                n = len(partial[0]) - 1
                path = GeodesicPath(
                    spec.name, np.arange(n + 1) * (length / steps), partial[0][:, 0], partial[1][:, 0],
                    length / steps, _speed_drift(spec, partial[0][:, 0], partial[1][:, 0]),
                )
            raise ChartDomainError(str(exc), partial_path=path) from None
        path = _make_path(spec, history[0][:, 0], history[1][:, 0], length, steps)
        if path.speed_drift < SPEED_DRIFT_TOL:
            return path
        logger.debug(f"{spec.name} 测地线速度漂移 {path.speed_drift:.2e}, 步长减半")
        step /= 2.0
    raise StepUnderflowError(f"步长减半 {MAX_HALVINGS} 次后速度漂移仍为 {path.speed_drift:.2e}")


def exp_map(spec: ManifoldSpec, p, w) -> np.ndarray:
    """exp_p(w), w 为任意切向量"""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    length = float(np.sqrt(w @ spec.metric(p) @ w))
    if length == 0.0:
        return p.copy()
    return integrate_geodesic(spec, p, w / length, length).end


def parallel_transport(spec: ManifoldSpec, path: GeodesicPath, initial_frame) -> TransportedFrame:
    """
    沿 path 平行移动初始标架 (与测地线同步重积分, 网格与 path 一致)

    Raises:
        GeometryInputError: 初始标架不正交
    """
    vectors = initial_frame.vectors if isinstance(initial_frame, OrthonormalFrame) else initial_frame
    vectors = np.asarray(vectors, dtype=float)
    g0 = spec.metric(path.start)
    error = float(np.max(np.abs(vectors @ g0 @ vectors.T - np.eye(len(vectors)))))
    if error > 1e-9:
        raise GeometryInputError(f"初始标架不是标准正交的, 误差 {error:.2e}")
    _, history, _ = _integrate(
        spec,
        _geodesic_rates(spec),
        [path.start[None], path.v[0][None], vectors[None]],
        np.array([path.length]),
        path.steps,
        record=True,
    )
    return TransportedFrame(path=path, frames=history[2][:, 0])


# ---------------------------------------------------------------------- Jacobi 场

def _shape_from(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """γ̇ 正交补 (标架下标 ≥ 1) 上的 A′A⁻¹"""
    s = np.linalg.solve(np.swapaxes(a[..., 1:, 1:], -1, -2), np.swapaxes(b[..., 1:, 1:], -1, -2))
    s = np.swapaxes(s, -1, -2)
    return 0.5 * (s + np.swapaxes(s, -1, -2))


def _jacobi_run(spec: ManifoldSpec, points, velocities, frames, spans, steps: int, record: bool):
    points, velocities = _as_batch(points), _as_batch(velocities)
    frames = np.asarray(frames, dtype=float)
    frames = frames[None] if frames.ndim == 2 else frames
    batch, d = points.shape
    zero = np.zeros((batch, d, d))
    eye = np.broadcast_to(np.eye(d), (batch, d, d)).copy()
    spans = np.broadcast_to(np.asarray(spans, dtype=float), (batch,))
    return _integrate(
        spec, _jacobi_rates(spec), [points, velocities, frames, zero, eye], spans, steps, record=record
    )


def jacobi_fields(
    spec: ManifoldSpec, path: GeodesicPath, frame=None, steps: int = JACOBI_STEPS
) -> JacobiSolution:
    """
    沿 path 积分 A(0) = 0, A′(0) = I 的 Jacobi 矩阵 (平行标架分量)

    frame 缺省时取 path 起点的适配标架 (E_1 = γ̇)
    """
    if frame is None:
        frame = adapted_frame(spec, path.start, path.v[0])
    vectors = frame.vectors if isinstance(frame, OrthonormalFrame) else np.asarray(frame, dtype=float)
    _, history, _ = _jacobi_run(spec, path.start, path.v[0], vectors, path.length, steps, record=True)
    return JacobiSolution(
        t=np.linspace(0.0, path.length, steps + 1),
        x=history[0][:, 0],
        v=history[1][:, 0],
        frames=history[2][:, 0],
        a=history[3][:, 0],
        a_prime=history[4][:, 0],
    )


def first_conjugate_time(
    spec: ManifoldSpec, p, v, t_max: float, steps: int = JACOBI_STEPS
) -> Optional[float]:
    """
    沿 exp_p(tv) 的第一个共轭点 (t ≤ t_max), 没有则返回 None

    以 det A⊥(t) 变号定位并线性插值; 偶数重数的共轭点以最小奇异值低于 1e-6 判定。
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    _unit_check(spec, p, v)
    if spec.dimension < 2:
        return None
    frame = adapted_frame(spec, p, v)
    _, history, _ = _jacobi_run(spec, p, v, frame.vectors, t_max, steps, record=True)
    a_perp = history[3][:, 0, 1:, 1:]
    t = np.linspace(0.0, t_max, steps + 1)
    det = np.linalg.det(a_perp[1:])
    sigma = np.linalg.svd(a_perp[1:], compute_uv=False)[:, -1]
    reference = np.sign(det[0])
    for i in range(1, len(det)):
        if np.sign(det[i]) != reference:
            t0, t1 = t[i], t[i + 1]
            return float(t0 + (t1 - t0) * det[i - 1] / (det[i - 1] - det[i]))
        if sigma[i] < 1e-6:
            return float(t[i + 1])
    return None


# ---------------------------------------------------------------------- 打靶

def _sphere_directions(d: int, count: int, seed: int) -> np.ndarray:
    """加扰 Sobol 序列映射到单位球面"""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    m = int(math.ceil(math.log2(max(count, 2))))
    rng = np.random.default_rng(seed)
    try:
        engine = qmc.Sobol(d, scramble=True, rng=rng)
    except TypeError:
        engine = qmc.Sobol(d, scramble=True, seed=rng)
    u = engine.random_base2(m)[:count]
    z = norm.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def _sweep(spec: ManifoldSpec, p: np.ndarray, q: np.ndarray, seed: int) -> np.ndarray:
    """粗扫: 返回按端点接近程度排序的若干初始切向量 w"""
    d = spec.dimension
    g = spec.metric(p)
    dirs = np.vstack([(q - p)[None], _sphere_directions(d, 64 * max(d - 1, 1), seed)])
    dirs = dirs / np.sqrt(np.einsum("bi,ij,bj->b", dirs, g, dirs))[:, None]
    estimate = float(np.sqrt((q - p) @ g @ (q - p)))
    span = 2.0 * estimate
    if spec.injectivity_radius_hint:
        span = min(span, spec.injectivity_radius_hint)
    _, history, alive = _integrate(
        spec,
        _geodesic_rates(spec),
        [np.broadcast_to(p, dirs.shape), dirs],
        np.full(len(dirs), span),
        SWEEP_STEPS,
        record=True,
        strict=False,
    )
    gaps = np.linalg.norm(history[0] - q, axis=-1)
    best_step = np.argmin(gaps, axis=0)
    best_gap = gaps[best_step, np.arange(len(dirs))]
    order = np.lexsort((np.arange(len(dirs)), best_gap))[:SWEEP_CANDIDATES]
    times = best_step[order] * span / SWEEP_STEPS
    return times[:, None] * dirs[order]


def _coarse_newton(spec: ManifoldSpec, p: np.ndarray, q: np.ndarray, w: np.ndarray):
    """粗网格上对所有候选同时做牛顿迭代 (中心差分雅可比), 返回 (w, 残差, 雅可比)"""
    k, d = w.shape
    residual = np.full(k, np.inf)
    jac = np.zeros((k, d, d))
    done = np.zeros(k, dtype=bool)
    for _ in range(COARSE_ITERATIONS):
        eps = 1e-6 * np.maximum(np.linalg.norm(w, axis=-1), 1.0)
        offsets = np.concatenate([np.zeros((1, d)), np.eye(d), -np.eye(d)])
        trial = w[:, None, :] + eps[:, None, None] * offsets[None]
        ends, _, alive = geodesic_endpoints(
            spec, np.broadcast_to(p, (k * (2 * d + 1), d)), trial.reshape(-1, d), 1.0, COARSE_STEPS
        )
        ends = ends.reshape(k, 2 * d + 1, d)
        alive = alive.reshape(k, 2 * d + 1).all(axis=-1)
        f = ends[:, 0] - q
        jac = np.swapaxes((ends[:, 1 : d + 1] - ends[:, d + 1 :]) / (2.0 * eps[:, None, None]), -1, -2)
        residual = np.where(alive, np.linalg.norm(f, axis=-1), np.inf)
        done = residual < 1e-11 * np.maximum(np.linalg.norm(w, axis=-1), 1.0)
        if done.all():
            break
        for i in range(k):
            if done[i] or not alive[i]:
                continue
            step = np.linalg.lstsq(jac[i], -f[i], rcond=None)[0]
            limit = 0.5 * max(np.linalg.norm(w[i]), 1.0)
            size = np.linalg.norm(step)
            w[i] = w[i] + (step if size <= limit else step * (limit / size))
    return w, residual, jac


def distance(
    spec: ManifoldSpec,
    p,
    q,
    seed: int = 0,
    initial=None,
    tol: float = SHOOTING_TOL,
) -> DistanceResult:
    """
    单次打靶求 d(p, q)

    先在 64·(d−1) 个低差异方向上粗扫, 对最近的若干候选做粗网格牛顿迭代,
    收敛者取最短 (并列时按初始方向字典序), 最后用细网格弦牛顿迭代使端点误差 < tol·d。
    initial 给定时跳过粗扫, 以之为唯一初始切向量。

    Raises:
        GeometryInputError: p = q, 点不在定义域, 结果超出单射半径提示
        ShootingError: 没有候选收敛
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.array_equal(p, q):
        raise GeometryInputError("距离要求 p ≠ q")
    for name, point in (("p", p), ("q", q)):
        if not bool(spec.in_domain(point)):
            raise GeometryInputError(f"{name} = {point.tolist()} 不在 {spec.name} 的坐标卡内")

    if initial is None:
        candidates = _sweep(spec, p, q, seed)
    else:
        candidates = np.asarray(initial, dtype=float).reshape(1, -1).copy()
    w, residual, jac = _coarse_newton(spec, p, q, candidates)
    g_p = spec.metric(p)
    lengths = np.sqrt(np.einsum("bi,ij,bj->b", w, g_p, w))
    converged = np.flatnonzero(residual < 1e-6 * np.maximum(lengths, 1.0))
    if len(converged) == 0:
        raise ShootingError(f"{spec.name} 上的打靶没有收敛方向", best_residual=float(np.min(residual)))
    best = min(converged, key=lambda i: (round(float(lengths[i]), 9), tuple(w[i] / lengths[i])))

    w_best, j_best = w[best].copy(), jac[best]
    g_q = spec.metric(q)
    error = float("inf")
    for _ in range(POLISH_ITERATIONS):
        length = float(np.sqrt(w_best @ g_p @ w_best))
        path = integrate_geodesic(spec, p, w_best / length, length)
        gap = path.end - q
        error = float(np.sqrt(gap @ g_q @ gap))
        if error < tol * length:
            hint = spec.injectivity_radius_hint
            if hint is not None and length > hint:
                raise GeometryInputError(f"d = {length:.6f} 超出单射半径提示 {hint:.6f}")
            logger.debug(f"{spec.name} 打靶收敛: d = {length:.12f}, 端点误差 {error:.2e}")
            return DistanceResult(
                value=length,
                path=path.with_endpoint_error(error),
                initial_velocity=w_best,
                candidates=len(converged),
            )
        w_best = w_best - np.linalg.lstsq(j_best, gap, rcond=None)[0]
    raise ShootingError(f"{spec.name} 上细网格迭代未收敛", best_residual=error)


# ---------------------------------------------------------------------- 距离函数的导数

def _require_radial(spec: ManifoldSpec, r: float) -> None:
    hint = spec.injectivity_radius_hint
    if hint is not None and r >= CUT_FRACTION * hint:
        raise GeometryInputError(f"r = {r:.6f} 不在 0.95 倍单射半径 ({CUT_FRACTION * hint:.6f}) 之内")


def _initial_direction(spec: ManifoldSpec, p: np.ndarray, x: np.ndarray, seed: int) -> Tuple[float, np.ndarray]:
    """p 处指向 x 的最短测地线初速度; 有闭式距离时由其梯度给出"""
    if spec.distance_jet_fn is not None:
        jet = spec.distance_jet_fn(x, spec.coordinates(p, 1))
        r = float(jet.v)
        g = spec.metric(p)
        grad = np.linalg.solve(g, jet.derivative(1))
        return r, -grad / np.sqrt(grad @ g @ grad)
    result = distance(spec, p, x, seed=seed)
    return result.value, result.path.v[0]


def _finish(
    spec: ManifoldSpec,
    x: np.ndarray,
    r: float,
    grad: np.ndarray,
    hess: np.ndarray,
    z: Optional[VectorField],
    route: str,
    endpoint_error: float = 0.0,
) -> RadialDerivatives:
    geo_g = spec.metric(x)
    ginv = np.linalg.inv(geo_g)
    laplacian = float(np.einsum("ij,ij->", ginv, hess))
    frame = adapted_frame(spec, x, grad, g=geo_g)
    perp = float(sum(e @ hess @ e for e in frame.vectors[frame.adapted_rank:]))
    drift = None
    if z is not None:
        drift = laplacian + float(z.value(spec, x) @ geo_g @ grad)
    return RadialDerivatives(
        point=x,
        distance=r,
        grad=grad,
        hess=hess,
        laplacian=laplacian,
        orthogonal_laplacian=perp,
        drift=drift,
        route=route,
        unit_error=abs(float(grad @ geo_g @ grad) - 1.0),
        endpoint_error=endpoint_error,
    )


def _jacobi_hessian(spec: ManifoldSpec, xs: np.ndarray, vs: np.ndarray, frames: np.ndarray, a, b) -> np.ndarray:
    """末端 Hess r 的坐标分量 (批量)"""
    s = np.zeros(a.shape)
    s[:, 1:, 1:] = _shape_from(a, b)
    w = np.einsum("bai,bij->baj", frames, spec.metric(xs))
    return np.einsum("bai,bac,bcj->bij", w, s, w)


def radial_derivatives_many(
    spec: ManifoldSpec,
    p_base,
    points,
    z: Optional[VectorField] = None,
    steps: int = JACOBI_STEPS,
    seed: int = 0,
) -> List[RadialDerivatives]:
    """Jacobi 路线, 对一批点同时积分"""
    p = np.asarray(p_base, dtype=float)
    points = _as_batch(points)
    lengths, velocities, frames = [], [], []
    for x in points:
        if np.array_equal(x, p):
            raise GeometryInputError("x 与基点重合, r 在此不可微")
        r, v = _initial_direction(spec, p, x, seed)
        _require_radial(spec, r)
        lengths.append(r)
        velocities.append(v)
        frames.append(adapted_frame(spec, p, v).vectors)
    state, _, _ = _jacobi_run(
        spec, np.broadcast_to(p, points.shape), np.array(velocities), np.array(frames),
        np.array(lengths), steps, record=False,
    )
    xs, vs, es, a, b = state
    hess = _jacobi_hessian(spec, xs, vs, es, a, b)
    results = []
    for i, x in enumerate(points):
        gap = xs[i] - x
        error = float(np.sqrt(gap @ spec.metric(x) @ gap))
        results.append(_finish(spec, xs[i], lengths[i], vs[i], hess[i], z, "jacobi", error))
    return results


def _stencil_derivatives(spec: ManifoldSpec, p: np.ndarray, x: np.ndarray, h_r: float, seed: int):
    base = distance(spec, p, x, seed=seed, tol=1e-11)
    w0 = base.initial_velocity

    def covector(y: np.ndarray) -> np.ndarray:
        if not bool(spec.in_domain(y)):
            raise GeometryInputError(f"差分模板点 {y.tolist()} 离开坐标卡")
        res = distance(spec, p, y, initial=w0, tol=1e-11)
        return spec.metric(y) @ res.path.v[-1]

    d = spec.dimension
    partial = np.zeros((d, d))
    for j in range(d):
        estimates = []
        for step in (h_r, 0.5 * h_r):
            e = np.zeros(d)
            e[j] = step
            estimates.append((covector(x + e) - covector(x - e)) / (2.0 * step))
        partial[:, j] = (4.0 * estimates[1] - estimates[0]) / 3.0
    partial = 0.5 * (partial + partial.T)
    dr = spec.metric(x) @ base.path.v[-1]
    hess = partial - np.einsum("kij,k->ij", christoffel(spec, x), dr)
    return base, hess


def radial_derivatives(
    spec: ManifoldSpec,
    p_base,
    x,
    z: Optional[VectorField] = None,
    route: str = "jacobi",
    h_r: float = STENCIL_STEP,
    seed: int = 0,
) -> RadialDerivatives:
    """
    r = d(p_base, ·) 在 x 处的 ∇r, Hess r, Δr, Δ⊥r 及 ℒr = Δr + Zr

    route:
        jacobi      沿最短测地线积分 Jacobi 场, Hess r = A′A⁻¹ (默认)
        stencil     对打靶得到的 dr 做对称坐标差分 (步长 h_r, Richardson 外推)
        closed-form 目录项闭式距离的二阶Jet

    Raises:
        GeometryInputError: x = p_base, 超出 0.95 倍单射半径, 模板离开定义域, 路线不可用
    """
    if route not in RADIAL_ROUTES:
        raise GeometryInputError(f"未知的路线 {route}, 可选: {', '.join(RADIAL_ROUTES)}")
    p = np.asarray(p_base, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.array_equal(x, p):
        raise GeometryInputError("x 与基点重合, r 在此不可微")

    if route == "jacobi":
        return radial_derivatives_many(spec, p, x[None], z=z, seed=seed)[0]

    if route == "closed-form":
        if spec.distance_jet_fn is None:
            raise GeometryInputError(f"{spec.name} 没有闭式距离")
        jet = spec.distance_jet_fn(p, spec.coordinates(x, 2))
        r = float(jet.v)
        _require_radial(spec, r)
        dr = jet.derivative(1)
        hess = jet.derivative(2) - np.einsum("kij,k->ij", christoffel(spec, x), dr)
        grad = np.linalg.solve(spec.metric(x), dr)
        return _finish(spec, x, r, grad, 0.5 * (hess + hess.T), z, route)

    base, hess = _stencil_derivatives(spec, p, x, h_r, seed)
    _require_radial(spec, base.value)
    return _finish(
        spec, x, base.value, base.path.v[-1], hess, z, route, base.path.endpoint_error or 0.0
    )


# ---------------------------------------------------------------------- 剖面与指标形式

def sine_profile(length: float) -> Profile:
    """f(t) = sin(πt/l)"""
    w = np.pi / length
    return Profile(
        name="sine",
        fn=lambda t: np.sin(w * np.asarray(t)),
        derivative=lambda t: w * np.cos(w * np.asarray(t)),
        second=lambda t: -w * w * np.sin(w * np.asarray(t)),
        description=f"sin(πt/{length:g})",
    )


def literal_j_profile(k: float) -> Profile:
    """
    𝔧(k,t) = cos√k t + (1 − cos√k t)/sin√k t · sin√k t, 按字面求值 (恒为 1)

    不满足 f(0) = f(l) = 0, 结果带标记
    """
    root = np.sqrt(k)

    def fn(t):
        t = np.asarray(t, dtype=float)
        c, s = np.cos(root * t), np.sin(root * t)
        with np.errstate(divide="ignore", invalid="ignore"):
            value = c + (1.0 - c) / s * s
        return np.where(np.isfinite(value), value, 1.0)

    return Profile(
        name="literal-j",
        fn=fn,
        derivative=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        second=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        flagged=True,
        description=f"j({k:g}, t) literal",
    )


def jacobi_profile(k: float, length: float) -> Profile:
    """f(t) = sin(√k t)·sin(√k (l − t)) / sin²(√k l/2)"""
    root = np.sqrt(k)
    scale = np.sin(0.5 * root * length) ** 2
    if k <= 0 or scale < 1e-12:
        raise GeometryInputError(f"jacobi 剖面要求 0 < √k·l < 2π, 实际 k = {k}, l = {length}")
    return Profile(
        name="jacobi",
        fn=lambda t: np.sin(root * np.asarray(t)) * np.sin(root * (length - np.asarray(t))) / scale,
        derivative=lambda t: root * np.sin(root * (length - 2.0 * np.asarray(t))) / scale,
        second=lambda t: -2.0 * k * np.cos(root * (length - 2.0 * np.asarray(t))) / scale,
        description=f"sin(√{k:g} t)·sin(√{k:g}({length:g}−t))",
    )


def alternative_profile(name: str, k: float, length: float) -> Profile:
    """geodesics.alternative_profile 设置对应的剖面"""
    if name == "jacobi":
        return jacobi_profile(k, length)
    if name == "literal":
        return literal_j_profile(k)
    raise GeometryInputError(f"未知的剖面 {name}, 可选: jacobi, literal")


def _curvature_along(spec: ManifoldSpec, xs: np.ndarray, vs: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """k[t, a] = R(E_a, γ̇, γ̇, E_a), 分块计算"""
    out = np.empty(frames.shape[:2])
    for start in range(0, len(xs), CURVATURE_CHUNK):
        sl = slice(start, start + CURVATURE_CHUNK)
        geo = point_geometry(spec, xs[sl])
        rv = np.einsum("tijkl,tj,tk->til", geo.riemann, vs[sl], vs[sl])
        out[sl] = np.einsum("tai,til,tal->ta", frames[sl], rv, frames[sl])
    return out


def index_form(
    spec: ManifoldSpec,
    path: GeodesicPath,
    profile: Profile,
    frame_indices: Optional[Sequence[int]] = None,
    transported: Optional[TransportedFrame] = None,
    aggregate_from: Optional[int] = None,
) -> IndexFormReport:
    """
    ℐ(fE_i, fE_i) = ∫ (f′² − f² R(E_i, γ̇, γ̇, E_i)) dt, 复合 Simpson 求积 (路径网格)

    frame_indices 为平行适配标架的下标 (0 为 γ̇), 缺省取 1..d−1;
    汇总项对下标 ≥ aggregate_from (缺省为结构秩) 求和。

    Raises:
        GeometryInputError: 剖面不满足 f(0) = f(l) = 0 (带标记的剖面除外)
        QuadratureError: 被积函数非有限
    """
    t = path.t
    f = np.asarray(profile.fn(t), dtype=float)
    df = np.asarray(profile.derivative(t), dtype=float)
    violation = float(max(abs(f[0]), abs(f[-1])))
    if violation > BOUNDARY_TOL and not profile.flagged:
        raise GeometryInputError(f"剖面 {profile.name} 不满足边界条件, |f| = {violation:.3e}")

    if transported is None:
        frame = adapted_frame(spec, path.start, path.v[0])
        transported = parallel_transport(spec, path, frame)
    d = transported.frames.shape[1]
    indices = list(range(1, d)) if frame_indices is None else list(frame_indices)
    start = spec.structure_rank if aggregate_from is None else aggregate_from

    curvature = _curvature_along(spec, path.x, path.v, transported.frames)
    values = []
    for i in indices:
        integrand = df**2 - f**2 * curvature[:, i]
        if not np.all(np.isfinite(integrand)):
            raise QuadratureError(f"指标形式被积函数在下标 {i} 处非有限")
        values.append(
            IndexFormValue(
                index=i,
                value=float(simpson(integrand, x=t)),
                integrand=integrand,
                description=f"{profile.description or profile.name} · E_{i + 1}",
                flagged=profile.flagged,
            )
        )
    aggregate = float(sum(v.value for v in values if v.index >= start))
    return IndexFormReport(
        profile=profile.name,
        length=path.length,
        values=values,
        aggregate=aggregate,
        aggregate_from=start,
        boundary_violation=violation,
        flagged=profile.flagged,
    )


__all__ = [
    "GeodesicPath",
    "TransportedFrame",
    "JacobiSolution",
    "DistanceResult",
    "RadialDerivatives",
    "Profile",
    "IndexFormValue",
    "IndexFormReport",
    "RADIAL_ROUTES",
    "integrate_geodesic",
    "geodesic_endpoints",
    "exp_map",
    "parallel_transport",
    "jacobi_fields",
    "first_conjugate_time",
    "distance",
    "radial_derivatives",
    "radial_derivatives_many",
    "sine_profile",
    "literal_j_profile",
    "jacobi_profile",
    "alternative_profile",
    "index_form",
]
