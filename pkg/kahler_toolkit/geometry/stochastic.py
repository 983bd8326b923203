"""
扩散过程模拟

一维比较扩散 dρ = √2 dβ + b(ρ) dt (b 为比较模型右端), 其边界的数值 Feller 分类,
以及坐标卡中生成元为 Δ + Z 的流形扩散与其径向过程 d_p(X_t)。

随机数按 (seed, 块序号) 分流, 块大小是运行配置的常量, 结果与线程数无关。
"""

import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from kahler_toolkit.core.errors import (
    ChartDomainError,
    DegenerateMetricError,
    DSLDomainError,
    GeometryInputError,
    QuadratureError,
)
from kahler_toolkit.core.logger import get_logger
from kahler_toolkit.geometry.comparison import ComparisonModel, ModelKind, s_func, s_ratio
from kahler_toolkit.geometry.curvature import metric_and_christoffel
from kahler_toolkit.geometry.manifold import ManifoldSpec, VectorField
from kahler_toolkit.utils.parallel import deterministic_map

logger = get_logger(__name__)

SQRT2 = math.sqrt(2.0)
DETECT_EPS = 1e-9
DEFAULT_FLOOR = 1e-6
STEP_FRACTION = 0.1
MAX_DEPTH = 40
DEFAULT_BLOCK = 1000
DRIFTS = ("comparison", "zero", "log-barrier")

FELLER_EPSILONS = (1e-2, 1e-3, 1e-4)
FELLER_POINTS = 800  # 每段对数网格点数
DIVERGENCE_RATIO = 0.7
AMBIGUOUS_RATIO = 0.4

CHART_EXIT_LIMIT = 0.01
DEFAULT_DECIMATION = 100
FAN_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


# ---------------------------------------------------------------------- 漂移

@dataclass(frozen=True)
class Drift:
    """
    一维漂移 b 及其势 Φ (Φ′ = b)

    噪声为 √2 dβ 时生成元为 f″ + b f′, 尺度密度 e^{−Φ}, 速度密度 e^{Φ}。
    left / right 为漂移的奇点 (None 表示该侧光滑)。
    """
    name: str
    rate: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], np.ndarray]
    left: Optional[float]
    right: Optional[float]

    def clearance(self, x: np.ndarray) -> np.ndarray:
        """到最近奇点的距离, 两侧都光滑时为 inf"""
        out = np.full(np.shape(x), np.inf)
        if self.left is not None:
            out = np.minimum(out, x - self.left)
        if self.right is not None:
            out = np.minimum(out, self.right - x)
        return out


def comparison_terms(model: ComparisonModel) -> List[Tuple[float, float]]:
    """比较右端写成 Σ a·𝔰′(κ)/𝔰(κ) 的 (a, κ) 列表"""
    k, m = model.k, model.m
    if model.kind is ModelKind.KAHLER:
        return [(m - 2.0, k), (1.0, 4.0 * k)]
    factor = 12.0 if model.variant == "printed" else 4.0
    return [(m - 4.0, k), (3.0, factor * k)]


def make_drift(model: ComparisonModel, name: str = "comparison", barrier: Optional[float] = None) -> Drift:
    """
    构造漂移

    comparison:  模型右端, 奇点为 0 与 min π/√κ
    zero:        b ≡ 0
    log-barrier: b = 1/(x − B), B 为屏障

    Raises:
        GeometryInputError: 未知漂移名
    """
    if name not in DRIFTS:
        raise GeometryInputError(f"未知漂移 {name}, 可选: {', '.join(DRIFTS)}")
    if name == "zero":
        return Drift(
            name="zero",
            rate=lambda x: np.zeros(np.shape(x)),
            potential=lambda x: np.zeros(np.shape(x)),
            left=None,
            right=None,
        )
    if name == "log-barrier":
        edge = model.barrier if barrier is None else float(barrier)
        return Drift(
            name="log-barrier",
            rate=lambda x: 1.0 / (np.asarray(x, dtype=float) - edge),
            potential=lambda x: np.log(edge - np.asarray(x, dtype=float)),
            left=None,
            right=edge,
        )

    terms = [(a, kappa) for a, kappa in comparison_terms(model) if a != 0.0]

    def rate(x):
        return sum(a * s_ratio(kappa, x) for a, kappa in terms)

    def potential(x):
        return sum(a * np.log(s_func(kappa, x)) for a, kappa in terms)

    singular = min(math.pi / math.sqrt(kappa) for _, kappa in terms)
    return Drift(name="comparison", rate=rate, potential=potential, left=0.0, right=singular)


# ---------------------------------------------------------------------- 配置

@dataclass(frozen=True)
class DiffusionConfig:
    """
    ρ 过程的模拟配置

    Attributes:
        model: 比较模型
        rho0: 初值, 0 < rho0 < barrier
        T: 时间区间长度
        dt: 基本步长
        paths: 路径数
        seed: 主种子
        barrier: 屏障, 缺省为模型的 barrier
        floor: 反射下限 ε_floor (数值保护)
        drift: comparison / zero / log-barrier
        block_size: 每个随机数流覆盖的路径数
        record_every: 每隔多少个基本步记录一次 ρ (0 表示不记录)
        refine: 每个基本步按 Brownian bridge 等分的子步数; 基本增量与 refine 无关, 用于 dt 减半比较
    """
    model: ComparisonModel
    rho0: float
    T: float
    dt: float
    paths: int
    seed: int = 0
    barrier: Optional[float] = None
    floor: float = DEFAULT_FLOOR
    drift: str = "comparison"
    block_size: int = DEFAULT_BLOCK
    record_every: int = 0
    refine: int = 1

    def __post_init__(self):
        if self.barrier is None:
            object.__setattr__(self, "barrier", float(self.model.barrier))
        if self.drift not in DRIFTS:
            raise GeometryInputError(f"未知漂移 {self.drift}, 可选: {', '.join(DRIFTS)}")
        if not self.barrier > 0:
            raise GeometryInputError(f"barrier 必须为正, 实际 {self.barrier}")
        if not 0.0 < self.rho0 < self.barrier:
            raise GeometryInputError(f"rho0 必须在 (0, {self.barrier:.6f}) 内, 实际 {self.rho0}")
        if not self.dt > 0 or not self.T > 0:
            raise GeometryInputError("dt 与 T 必须为正")
        if self.paths < 1:
            raise GeometryInputError(f"paths 必须 ≥ 1, 实际 {self.paths}")
        if not 0.0 < self.floor < self.rho0:
            raise GeometryInputError(f"floor 必须在 (0, rho0) 内, 实际 {self.floor}")
        if self.block_size < 1 or self.record_every < 0:
            raise GeometryInputError("block_size 必须 ≥ 1, record_every 必须 ≥ 0")
        if self.refine < 1:
            raise GeometryInputError(f"refine 必须 ≥ 1, 实际 {self.refine}")
        if self.drift == "comparison":
            singular = make_drift(self.model).right
            if self.barrier > singular + DETECT_EPS:
                raise GeometryInputError(
                    f"barrier {self.barrier:.6f} 超过漂移奇点 {singular:.6f}"
                )

    @property
    def steps(self) -> int:
        return max(1, math.ceil(self.T / self.dt - 1e-9))

    @property
    def step(self) -> float:
        """实际基本步长 T/steps"""
        return self.T / self.steps

    @property
    def fine_step(self) -> float:
        return self.step / self.refine

    def make_drift(self) -> Drift:
        return make_drift(self.model, self.drift, self.barrier)

    def with_(self, **changes) -> "DiffusionConfig":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return DiffusionConfig(**data)

    def to_dict(self) -> Dict:
        data = {f: getattr(self, f) for f in self.__dataclass_fields__ if f != "model"}
        data["model"] = self.model.to_dict()
        return data


# ---------------------------------------------------------------------- ρ 过程

def _reflect(x: np.ndarray, floor: float) -> np.ndarray:
    return np.where(x < floor, 2.0 * floor - x, x)


def _advance(
    drift: Drift,
    x: np.ndarray,
    h: float,
    dw: np.ndarray,
    depth: int,
    floor: float,
    rng: np.random.Generator,
    counts: np.ndarray,
    min_step: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    一步 Euler–Maruyama, 不满足 |b|·h ≤ 0.1·(到奇点距离) 时按 Brownian bridge 对分

    counts / min_step 原地累计每条路径的子步数与最小步长。
    返回 (终点, 步长下溢标记)。
    """
    clearance = drift.clearance(x)
    crossed = clearance <= 0.0  # 已越过奇点, 原地等待屏障判定
    b = np.where(crossed, 0.0, drift.rate(np.where(crossed, floor, x)))
    ok = crossed | (np.abs(b) * h <= STEP_FRACTION * clearance)

    y = np.where(crossed, x, x + b * h + SQRT2 * dw)
    y = _reflect(y, floor)
    underflow = np.zeros(x.shape, dtype=bool)
    counts[ok] += 1
    min_step[ok] = np.minimum(min_step[ok], h)

    split = np.flatnonzero(~ok)
    if split.size == 0:
        return y, underflow
    if depth >= MAX_DEPTH:
        underflow[split] = True
        y[split] = x[split]
        return y, underflow

    half = 0.5 * h
    w_end = dw[split]
    w_mid = 0.5 * w_end + math.sqrt(0.25 * h) * rng.standard_normal(split.size)
    sub_counts = np.zeros(split.size, dtype=np.int64)
    sub_min = np.full(split.size, np.inf)
    mid, bad_a = _advance(drift, x[split], half, w_mid, depth + 1, floor, rng, sub_counts, sub_min)
    end, bad_b = _advance(drift, mid, half, w_end - w_mid, depth + 1, floor, rng, sub_counts, sub_min)
    bad = bad_a | bad_b
    y[split] = np.where(bad, x[split], end)
    underflow[split] = bad
    counts[split] += sub_counts
    min_step[split] = np.minimum(min_step[split], sub_min)
    return y, underflow


@dataclass
class _RhoBlock:
    terminal: np.ndarray
    max_rho: np.ndarray
    hit: np.ndarray
    hit_time: np.ndarray
    underflow: np.ndarray
    substeps: np.ndarray
    min_step: np.ndarray
    records: Optional[np.ndarray]


def _bridge_increments(dw: np.ndarray, h: float, refine: int, rng: np.random.Generator) -> List[np.ndarray]:
    """把基本增量 dw (步长 h) 按 Brownian bridge 等分为 refine 段, 各段之和等于 dw"""
    if refine == 1:
        return [dw]
    fine = h / refine
    remaining = dw.copy()
    pieces = []
    for j in range(refine - 1):
        left = refine - j
        piece = remaining / left + math.sqrt(fine * (left - 1) / left) * rng.standard_normal(dw.size)
        pieces.append(piece)
        remaining = remaining - piece
    pieces.append(remaining)
    return pieces


def _simulate_block(config: DiffusionConfig, block: int) -> _RhoBlock:
    start = block * config.block_size
    count = min(config.block_size, config.paths - start)
    rng = np.random.default_rng([config.seed, block])
    bridge = np.random.default_rng([config.seed, block, 1])
    drift = config.make_drift()
    h = config.step
    fine = config.fine_step
    sqrt_h = math.sqrt(h)
    threshold = config.barrier - DETECT_EPS

    x = np.full(count, float(config.rho0))
    max_rho = x.copy()
    hit = x >= threshold
    hit_time = np.where(hit, 0.0, np.nan)
    underflow = np.zeros(count, dtype=bool)
    substeps = np.zeros(count, dtype=np.int64)
    min_step = np.full(count, np.inf)

    every = config.record_every
    records = None
    if every:
        records = np.empty((count, config.steps // every + 1))
        records[:, 0] = x

    for n in range(1, config.steps + 1):
        dw = sqrt_h * rng.standard_normal(count)  # 全量抽样, 基本增量只取自 rng
        for j, piece in enumerate(_bridge_increments(dw, h, config.refine, bridge)):
            alive = np.flatnonzero(~(hit | underflow))
            if not alive.size:
                continue
            counts = np.zeros(alive.size, dtype=np.int64)
            steps_min = np.full(alive.size, np.inf)
            y, bad = _advance(drift, x[alive], fine, piece[alive], 0, config.floor, bridge, counts, steps_min)
            substeps[alive] += counts
            min_step[alive] = np.minimum(min_step[alive], steps_min)
            x[alive] = y
            underflow[alive] |= bad
            max_rho[alive] = np.maximum(max_rho[alive], y)
            new_hit = (~bad) & (y >= threshold)
            hit[alive] |= new_hit
            hit_time[alive[new_hit]] = (n - 1) * h + (j + 1) * fine
        if every and n % every == 0:
            records[:, n // every] = x

    return _RhoBlock(x, max_rho, hit, hit_time, underflow, substeps, min_step, records)


@dataclass
class DiffusionEnsemble:
    """
    ρ 过程的路径集合

    hit[i] ⇔ max_rho[i] ≥ barrier − 1e-9; 步长下溢的路径 (flagged) 不计入聚合量。
    """
    config: DiffusionConfig
    terminal: np.ndarray
    max_rho: np.ndarray
    hit: np.ndarray
    hit_time: np.ndarray
    flagged: np.ndarray
    substeps: np.ndarray
    min_step: np.ndarray
    record_times: Optional[np.ndarray] = None
    records: Optional[np.ndarray] = None

    @property
    def valid(self) -> np.ndarray:
        return ~self.flagged

    @property
    def hit_count(self) -> int:
        return int(np.count_nonzero(self.hit & self.valid))

    @property
    def flagged_count(self) -> int:
        return int(np.count_nonzero(self.flagged))

    @property
    def max_excursion(self) -> float:
        values = self.max_rho[self.valid]
        return float(values.max()) if values.size else float("nan")

    def moments(self) -> Dict[str, float]:
        values = self.terminal[self.valid]
        if values.size == 0:
            return {"mean": float("nan"), "variance": float("nan"), "count": 0}
        variance = float(values.var(ddof=1)) if values.size > 1 else 0.0
        return {"mean": float(values.mean()), "variance": variance, "count": int(values.size)}

    def step_statistics(self) -> Dict[str, float]:
        valid = self.valid
        base = self.config.steps
        per_step = self.substeps[valid] / base if np.any(valid) else np.array([np.nan])
        smallest = self.min_step[valid]
        return {
            "base_step": self.config.step,
            "fine_step": self.config.fine_step,
            "mean_substeps_per_step": float(np.mean(per_step)),
            "max_substeps_per_step": float(np.max(per_step)),
            "min_effective_step": float(smallest.min()) if smallest.size else float("nan"),
        }

    def rows(self) -> List[Dict]:
        """逐路径导出: path_id, hit, hit_time, max_rho, terminal, flagged"""
        return [
            {
                "path_id": i,
                "hit": bool(self.hit[i]),
                "hit_time": float(self.hit_time[i]),
                "max_rho": float(self.max_rho[i]),
                "terminal": float(self.terminal[i]),
                "flagged": bool(self.flagged[i]),
            }
            for i in range(self.terminal.size)
        ]

    def quantile_fan(self, levels: Sequence[float] = FAN_LEVELS) -> List[Dict[str, float]]:
        """
        各记录时刻 ρ 的分位数

        Raises:
            GeometryInputError: 模拟时未开启记录
        """
        if self.records is None:
            raise GeometryInputError("未记录路径, 请设置 record_every > 0")
        values = self.records[self.valid]
        table = np.quantile(values, levels, axis=0) if values.size else np.full(
            (len(levels), self.record_times.size), np.nan
        )
        rows = []
        for j, t in enumerate(self.record_times):
            row = {"t": float(t)}
            row.update({f"q{round(level * 100):02d}": float(table[i, j]) for i, level in enumerate(levels)})
            rows.append(row)
        return rows

    def summary(self) -> Dict:
        return {
            "paths": int(self.terminal.size),
            "hit_count": self.hit_count,
            "flagged_count": self.flagged_count,
            "barrier": self.config.barrier,
            "barriers": self.config.model.barriers(),
            "detect_eps": DETECT_EPS,
            "max_excursion": self.max_excursion,
            "terminal": self.moments(),
            "steps": self.step_statistics(),
        }


def simulate_rho(config: DiffusionConfig, threads: Optional[int] = None) -> DiffusionEnsemble:
    """
    Euler–Maruyama 模拟 ρ 过程

    奇点附近按漂移自适应对分 (子步增量由 Brownian bridge 生成, 基本步的粗路径不变),
    在 floor 处反射, 仅在基本步时刻判定是否到达 barrier − 1e-9。
    """
    blocks = math.ceil(config.paths / config.block_size)
    logger.info(
        f"模拟 ρ 过程: drift={config.drift}, paths={config.paths}, steps={config.steps}, "
        f"blocks={blocks}"
    )
    parts = deterministic_map(lambda b: _simulate_block(config, b), range(blocks), threads)

    def cat(name):
        return np.concatenate([getattr(p, name) for p in parts])

    records = None
    record_times = None
    if config.record_every:
        records = np.concatenate([p.records for p in parts], axis=0)
        record_times = config.step * config.record_every * np.arange(records.shape[1])

    ensemble = DiffusionEnsemble(
        config=config,
        terminal=cat("terminal"),
        max_rho=cat("max_rho"),
        hit=cat("hit"),
        hit_time=cat("hit_time"),
        flagged=cat("underflow"),
        substeps=cat("substeps"),
        min_step=cat("min_step"),
        record_times=record_times,
        records=records,
    )
    if ensemble.flagged_count:
        logger.warning(f"{ensemble.flagged_count} 条路径步长下溢, 已排除")
    logger.info(f"模拟完成: 命中 {ensemble.hit_count}, 最大偏移 {ensemble.max_excursion:.6f}")
    return ensemble


# ---------------------------------------------------------------------- Feller 分类

ENDPOINT_CLASSES = ("regular", "exit", "entrance", "natural")


@dataclass
class EndpointClass:
    """
    端点分类

    scale_integral 为 ∫ s′·M (有限 ⇔ 可达), speed_integral 为 ∫ m·S,
    均按 ε 从大到小列出; ratio 为相邻增量之比, 大于 0.7 视为发散。
    """
    side: str
    location: float
    kind: str
    epsilons: List[float]
    scale_integral: List[float]
    speed_integral: List[float]
    scale_ratio: float
    speed_ratio: float
    settled: bool = True

    @property
    def accessible(self) -> bool:
        return self.kind in ("regular", "exit")

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["accessible"] = self.accessible
        return data


@dataclass
class BoundaryClassification:
    drift: str
    interval: Tuple[float, float]
    left: EndpointClass
    right: EndpointClass

    def to_dict(self) -> Dict:
        return {
            "drift": self.drift,
            "interval": list(self.interval),
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }


def _log_grid(start: float, stops: Sequence[float]) -> np.ndarray:
    """从 start 到各 stop 的分段对数网格 (包含每个 stop)"""
    pieces = []
    current = start
    for stop in stops:
        piece = np.geomspace(current, stop, FELLER_POINTS)
        pieces.append(piece if not pieces else piece[1:])
        current = stop
    return np.concatenate(pieces)


def _increment_ratio(values: Sequence[float]) -> float:
    first = values[1] - values[0]
    second = values[2] - values[1]
    if first <= 0:
        return 0.0 if second <= 0 else float("inf")
    return second / first


def _classify_endpoint(drift: Drift, side: str, location: float, centre: float, epsilons) -> EndpointClass:
    gap = abs(location - centre)
    u = _log_grid(gap, epsilons)  # 到端点的距离, 递减
    x = location - u if side == "right" else location + u
    potential = drift.potential(x) - drift.potential(np.array([centre]))[0]
    if not np.all(np.isfinite(potential)):
        raise QuadratureError(f"{side} 端点附近势函数非有限")
    s_density = np.exp(-potential)
    m_density = np.exp(potential)

    # 沿 u 递减方向积分, 长度元 |dx| = −du
    length = np.concatenate([[0.0], np.cumsum(-np.diff(u))])
    big_m = cumulative_trapezoid(m_density, length, initial=0.0)
    big_s = cumulative_trapezoid(s_density, length, initial=0.0)
    scale = cumulative_trapezoid(s_density * big_m, length, initial=0.0)
    speed = cumulative_trapezoid(m_density * big_s, length, initial=0.0)

    marks = [int(np.argmin(np.abs(u - eps))) for eps in epsilons]
    scale_values = [float(scale[i]) for i in marks]
    speed_values = [float(speed[i]) for i in marks]
    if not all(np.isfinite(scale_values + speed_values)):
        raise QuadratureError(
            f"{side} 端点积分非有限, 趋势 scale={scale_values}, speed={speed_values}"
        )

    scale_ratio = _increment_ratio(scale_values)
    speed_ratio = _increment_ratio(speed_values)
    scale_divergent = scale_ratio > DIVERGENCE_RATIO
    speed_divergent = speed_ratio > DIVERGENCE_RATIO
    if not scale_divergent and not speed_divergent:
        kind = "regular"
    elif not scale_divergent:
        kind = "exit"
    elif not speed_divergent:
        kind = "entrance"
    else:
        kind = "natural"
    settled = all(
        not AMBIGUOUS_RATIO < r <= DIVERGENCE_RATIO for r in (scale_ratio, speed_ratio)
    )
    if not settled:
        logger.warning(f"{side} 端点分类不稳定: 比值 {scale_ratio:.3f} / {speed_ratio:.3f}")
    return EndpointClass(
        side=side,
        location=location,
        kind=kind,
        epsilons=list(epsilons),
        scale_integral=scale_values,
        speed_integral=speed_values,
        scale_ratio=float(scale_ratio),
        speed_ratio=float(speed_ratio),
        settled=settled,
    )


def boundary_classification(
    model: ComparisonModel,
    drift: str = "comparison",
    barrier: Optional[float] = None,
    epsilons: Sequence[float] = FELLER_EPSILONS,
) -> BoundaryClassification:
    """
    (0, barrier) 两端的数值 Feller 分类

    参考点取区间中点; barrier < 1 时 ε 按 barrier 等比缩放。

    Raises:
        QuadratureError: 积分出现非有限值 (附带各 ε 的趋势)
    """
    edge = model.barrier if barrier is None else float(barrier)
    drift_obj = make_drift(model, drift, edge)
    scale = min(1.0, edge)
    eps = [e * scale for e in sorted(epsilons, reverse=True)]
    if len(eps) != 3 or eps[0] >= 0.5 * edge:
        raise GeometryInputError("需要三个 ε, 且都小于区间半宽")
    centre = 0.5 * edge
    left = _classify_endpoint(drift_obj, "left", 0.0, centre, eps)
    right = _classify_endpoint(drift_obj, "right", edge, centre, eps)
    logger.info(f"边界分类 ({drift}): 左 {left.kind}, 右 {right.kind}")
    return BoundaryClassification(drift=drift, interval=(0.0, edge), left=left, right=right)


# ---------------------------------------------------------------------- 流形扩散

def laplace_beltrami_drift(spec: ManifoldSpec, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """返回 (−g^{ij}Γ^k_ij, g⁻¹), 批量"""
    _, ginv, gamma = metric_and_christoffel(spec, spec.coordinates(x, 1))
    return -np.einsum("...ij,...kij->...k", ginv.v, gamma.v), ginv.v


def radial_distance(spec: ManifoldSpec, base: np.ndarray, points: np.ndarray) -> np.ndarray:
    """批量 d_p(x): 有闭式距离时直接求值, 否则逐点打靶"""
    points = np.atleast_2d(points)
    if spec.distance_jet_fn is not None:
        return np.asarray(spec.distance_jet_fn(base, spec.coordinates(points, 0)).v, dtype=float)
    from kahler_toolkit.geometry.geodesics import distance

    out = np.empty(points.shape[0])
    for i, q in enumerate(points):
        out[i] = 0.0 if np.allclose(q, base) else distance(spec, base, q).value
    return out


@dataclass
class _ManifoldBlock:
    radial: np.ndarray
    square_displacement: np.ndarray
    flagged: np.ndarray
    exit_time: np.ndarray
    terminal: np.ndarray


@dataclass(frozen=True)
class ManifoldRun:
    spec: ManifoldSpec
    z: Optional[VectorField]
    start: np.ndarray
    base: np.ndarray
    T: float
    paths: int
    seed: int
    dt: float
    decimation: int
    block_size: int

    @property
    def steps(self) -> int:
        return max(1, math.ceil(self.T / self.dt - 1e-9))

    @property
    def step(self) -> float:
        return self.T / self.steps

    @property
    def sample_steps(self) -> np.ndarray:
        marks = list(range(0, self.steps + 1, self.decimation))
        if marks[-1] != self.steps:
            marks.append(self.steps)
        return np.asarray(marks)


def _manifold_block(run: ManifoldRun, block: int) -> _ManifoldBlock:
    spec = run.spec
    start = block * run.block_size
    count = min(run.block_size, run.paths - start)
    rng = np.random.default_rng([run.seed, block])
    h = run.step
    sqrt_h = math.sqrt(h)
    d = spec.dimension
    marks = run.sample_steps
    slots = {int(s): j for j, s in enumerate(marks)}

    x = np.tile(run.start, (count, 1))
    flagged = np.zeros(count, dtype=bool)
    exit_time = np.full(count, np.nan)
    radial = np.empty((count, marks.size))
    square = np.empty((count, marks.size))
    radial[:, 0] = radial_distance(spec, run.base, x)
    square[:, 0] = 0.0

    for n in range(1, run.steps + 1):
        dw = sqrt_h * rng.standard_normal((count, d))
        alive = np.flatnonzero(~flagged)
        if alive.size:
            xa = x[alive]
            b, ginv = laplace_beltrami_drift(spec, xa)
            if run.z is not None and not run.z.is_zero:
                b = b + run.z.value(spec, xa)
            sigma = np.linalg.cholesky(ginv)
            y = xa + b * h + SQRT2 * np.einsum("...ij,...j->...i", sigma, dw[alive])
            inside = spec.in_domain(y) & np.all(np.isfinite(y), axis=-1)
            left = alive[~inside]
            flagged[left] = True
            exit_time[left] = n * h
            x[alive[inside]] = y[inside]
        j = slots.get(n)
        if j is not None:
            radial[:, j] = radial_distance(spec, run.base, x)
            square[:, j] = np.einsum("...i,...i->...", x - run.start, x - run.start)
    return _ManifoldBlock(radial, square, flagged, exit_time, x.copy())


@dataclass
class ManifoldEnsemble:
    """
    坐标卡扩散的径向统计

    radial[i, j] 为第 i 条路径在 times[j] 的 d_p(X_t); 离开坐标卡的路径冻结在最后位置并标记。
    """
    spec_name: str
    times: np.ndarray
    radial: np.ndarray
    square_displacement: np.ndarray
    flagged: np.ndarray
    exit_time: np.ndarray
    terminal: np.ndarray
    decimation: int
    dt: float

    @property
    def valid(self) -> np.ndarray:
        return ~self.flagged

    @property
    def flagged_fraction(self) -> float:
        return float(np.mean(self.flagged))

    @property
    def run_valid(self) -> bool:
        return self.flagged_fraction <= CHART_EXIT_LIMIT

    @property
    def max_radial(self) -> float:
        values = self.radial[self.valid]
        return float(values.max()) if values.size else float("nan")

    def mean_square_displacement(self) -> np.ndarray:
        values = self.square_displacement[self.valid]
        return values.mean(axis=0) if values.size else np.full(self.times.size, np.nan)

    def rows(self) -> List[Dict]:
        return [
            {
                "path_id": i,
                "flagged": bool(self.flagged[i]),
                "exit_time": float(self.exit_time[i]),
                "max_radial": float(self.radial[i].max()),
                "terminal_radial": float(self.radial[i, -1]),
            }
            for i in range(self.radial.shape[0])
        ]

    def quantile_fan(self, levels: Sequence[float] = FAN_LEVELS) -> List[Dict[str, float]]:
        values = self.radial[self.valid]
        table = np.quantile(values, levels, axis=0)
        msd = self.mean_square_displacement()
        rows = []
        for j, t in enumerate(self.times):
            row = {"t": float(t)}
            row.update({f"q{round(level * 100):02d}": float(table[i, j]) for i, level in enumerate(levels)})
            row["mean_square_displacement"] = float(msd[j])
            rows.append(row)
        return rows

    def summary(self) -> Dict:
        return {
            "manifold": self.spec_name,
            "paths": int(self.radial.shape[0]),
            "flagged_count": int(np.count_nonzero(self.flagged)),
            "flagged_fraction": self.flagged_fraction,
            "run_valid": self.run_valid,
            "max_radial": self.max_radial,
            "terminal_radial_mean": float(np.mean(self.radial[self.valid, -1])) if np.any(self.valid) else float("nan"),
            "mean_square_displacement": float(self.mean_square_displacement()[-1]),
            "decimation": self.decimation,
            "dt": self.dt,
        }


def manifold_diffusion(
    spec: ManifoldSpec,
    z: Optional[VectorField],
    q,
    T: float,
    paths: int,
    seed: int = 0,
    dt: float = 1e-3,
    decimation: int = DEFAULT_DECIMATION,
    base=None,
    threads: Optional[int] = None,
    block_size: int = 256,
) -> ManifoldEnsemble:
    """
    坐标卡中生成元 Δ + Z 的扩散

    dX = √2 σ dW + (b_Δ + Z) dt, σσᵀ = g⁻¹, b_Δ^k = −g^{ij}Γ^k_ij;
    每 decimation 步记录一次 d_p(X_t)。

    Raises:
        GeometryInputError: q 与基点重合或不在坐标卡内, 参数非法
        ChartDomainError: 离开坐标卡的路径超过 1%
    """
    from kahler_toolkit.geometry.catalog import base_point

    p = base_point(spec) if base is None else np.asarray(base, dtype=float)
    start = np.asarray(q, dtype=float)
    if start.shape != (spec.dimension,):
        raise GeometryInputError(f"起点维数必须为 {spec.dimension}")
    if np.allclose(start, p):
        raise GeometryInputError("起点 q 不能与基点 p 重合")
    if not bool(spec.in_domain(start[None, :])[0]):
        raise GeometryInputError("起点 q 不在坐标卡内")
    if paths < 1 or not T > 0 or not dt > 0 or decimation < 1 or block_size < 1:
        raise GeometryInputError("paths, T, dt, decimation, block_size 必须为正")

    run = ManifoldRun(spec, z, start, p, float(T), int(paths), int(seed), float(dt), int(decimation), int(block_size))
    blocks = math.ceil(paths / block_size)
    logger.info(f"流形扩散 {spec.name}: paths={paths}, steps={run.steps}, decimation={decimation}")
    try:
        parts = deterministic_map(lambda b: _manifold_block(run, b), range(blocks), threads)
    except (DSLDomainError, DegenerateMetricError, np.linalg.LinAlgError) as e:
        raise ChartDomainError(f"扩散路径到达度量退化处: {e}") from e

    ensemble = ManifoldEnsemble(
        spec_name=spec.name,
        times=run.step * run.sample_steps,
        radial=np.concatenate([b.radial for b in parts]),
        square_displacement=np.concatenate([b.square_displacement for b in parts]),
        flagged=np.concatenate([b.flagged for b in parts]),
        exit_time=np.concatenate([b.exit_time for b in parts]),
        terminal=np.concatenate([b.terminal for b in parts]),
        decimation=run.decimation,
        dt=run.step,
    )
    if not ensemble.run_valid:
        raise ChartDomainError(
            f"{ensemble.flagged_fraction:.2%} 的路径离开坐标卡 (上限 {CHART_EXIT_LIMIT:.0%})"
        )
    if ensemble.flagged.any():
        logger.warning(f"{int(ensemble.flagged.sum())} 条路径离开坐标卡, 已排除")
    return ensemble


__all__ = [
    "DETECT_EPS",
    "DRIFTS",
    "FELLER_EPSILONS",
    "Drift",
    "comparison_terms",
    "make_drift",
    "DiffusionConfig",
    "DiffusionEnsemble",
    "simulate_rho",
    "EndpointClass",
    "BoundaryClassification",
    "boundary_classification",
    "laplace_beltrami_drift",
    "radial_distance",
    "ManifoldEnsemble",
    "manifold_diffusion",
]
