"""
坐标卡上的流形描述

ManifoldSpec 把度量、复结构/四元结构写成"坐标Jet → 值Jet"的函数,
目录项 (闭式) 与用户表达式 (DSL) 走同一条计算路径。
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from kahler_toolkit.core.errors import DegenerateMetricError, GeometryInputError
from kahler_toolkit.geometry.jet import Jet, stack
from kahler_toolkit.geometry.metric_dsl import Expression, evaluate_on, parse_expression

# 坐标Jet (值形状 B + (d,)) → 值Jet
FieldFunction = Callable[[Jet], Jet]

UNIT_TOL = 1e-9
FRAME_TOL = 1e-10
MIN_EIGENVALUE = 1e-10


class ManifoldKind(str, Enum):
    """流形类型"""
    KAHLER = "kahler"
    QUATERNIONIC = "quaternionic"
    RIEMANNIAN = "riemannian"


@dataclass(frozen=True)
class ChartDomain:
    """
    坐标卡定义域

    kind: "all" (整个R^d), "ball" (|x| < radius), "box" (逐坐标区间)
    """
    kind: str = "all"
    radius: float = float("inf")
    bounds: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("all", "ball", "box"):
            raise GeometryInputError(f"未知的坐标卡定义域类型: {self.kind}")
        if self.kind == "ball" and not self.radius > 0:
            raise GeometryInputError("球形定义域半径必须为正")

    def contains(self, x) -> np.ndarray:
        """逐点判断 (支持批量), 返回布尔数组"""
        x = np.asarray(x, dtype=float)
        if self.kind == "all":
            return np.all(np.isfinite(x), axis=-1)
        if self.kind == "ball":
            return np.linalg.norm(x, axis=-1) < self.radius
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.all((x > lo) & (x < hi), axis=-1)

    def to_dict(self) -> Dict:
        if self.kind == "ball":
            return {"ball": self.radius}
        if self.kind == "box":
            return {"box": [list(b) for b in self.bounds]}
        return {"all": True}


@dataclass(frozen=True)
class ManifoldSpec:
    """
    坐标卡中的流形

    Attributes:
        name: 名称 (目录名或文件名)
        dimension: 实维数 d (凯勒 d=2n, 四元凯勒 d=4n)
        kind: 流形类型
        metric_fn: 坐标Jet → 度量矩阵Jet g_ij
        structure_fns: 凯勒为 (J,), 四元为 (I, J, K); 矩阵约定 (Jv)^i = J[i, j] v^j
        injectivity_radius_hint: 单射半径提示
        chart_domain: 坐标卡定义域
        hermitian_fn: 全纯坐标下 h_{ij̄} 的 (实部, 虚部) Jet, 仅凯勒目录项提供
        distance_jet_fn: 闭式距离 d(base, x) 作为 x 的Jet, 目录项可选提供
    """
    name: str
    dimension: int
    kind: ManifoldKind
    metric_fn: FieldFunction
    structure_fns: Tuple[FieldFunction, ...] = ()
    injectivity_radius_hint: Optional[float] = None
    chart_domain: ChartDomain = field(default_factory=ChartDomain)
    description: str = ""
    source: str = "catalog"
    hermitian_fn: Optional[Callable[[Jet], Tuple[Jet, Jet]]] = None
    distance_jet_fn: Optional[Callable[[np.ndarray, Jet], Jet]] = None
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise GeometryInputError("维数必须 ≥ 1")
        expected = {ManifoldKind.KAHLER: 1, ManifoldKind.QUATERNIONIC: 3, ManifoldKind.RIEMANNIAN: 0}
        if len(self.structure_fns) != expected[self.kind]:
            raise GeometryInputError(
                f"{self.kind.value} 流形需要 {expected[self.kind]} 个结构张量, "
                f"实际 {len(self.structure_fns)}"
            )
        if self.kind is ManifoldKind.KAHLER and self.dimension % 2:
            raise GeometryInputError("凯勒流形实维数必须为偶数")
        if self.kind is ManifoldKind.QUATERNIONIC and self.dimension % 4:
            raise GeometryInputError("四元凯勒流形实维数必须为4的倍数")

    # ------------------------------------------------------------------ 维数

    @property
    def n(self) -> int:
        """复维数 (凯勒) 或四元维数 (四元凯勒); 黎曼流形返回 d"""
        if self.kind is ManifoldKind.KAHLER:
            return self.dimension // 2
        if self.kind is ManifoldKind.QUATERNIONIC:
            return self.dimension // 4
        return self.dimension

    @property
    def structure_rank(self) -> int:
        """结构像张成的子空间维数: 凯勒 2, 四元 4, 黎曼 1"""
        return len(self.structure_fns) + 1

    # ------------------------------------------------------------------ 求值

    def coordinates(self, x, order: int) -> Jet:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise GeometryInputError(f"坐标维数 {x.shape[-1]} 与流形维数 {self.dimension} 不一致")
        return Jet.coordinates(x, order)

    def metric_jet(self, x, order: int) -> Jet:
        return self.metric_fn(self.coordinates(x, order))

    def metric(self, x) -> np.ndarray:
        return self.metric_jet(x, 0).v

    def structures(self, x, order: int = 0) -> Tuple[Jet, ...]:
        xj = self.coordinates(x, order)
        return tuple(fn(xj) for fn in self.structure_fns)

    def structure_matrices(self, x) -> Tuple[np.ndarray, ...]:
        return tuple(s.v for s in self.structures(x, 0))

    def in_domain(self, x) -> np.ndarray:
        return self.chart_domain.contains(x)

    def check_metric(self, g: np.ndarray, where: str = "") -> None:
        """度量正定性检查, 最小特征值 ≤ 1e-10 视为退化"""
        eig = np.linalg.eigvalsh(g)
        low = float(np.min(eig))
        if not np.isfinite(low) or low <= MIN_EIGENVALUE:
            raise DegenerateMetricError(f"度量在 {where or '该点'} 退化, 最小特征值 {low:.3e}")

    def describe(self) -> Dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "dimension": self.dimension,
            "n": self.n,
            "injectivity_radius_hint": self.injectivity_radius_hint,
            "chart_domain": self.chart_domain.to_dict(),
            "source": self.source,
            "description": self.description,
        }


@dataclass(frozen=True)
class TangentVector:
    """切向量: 基点 + 坐标分量"""
    base_point: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base_point", np.asarray(self.base_point, dtype=float))
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))
        if self.base_point.shape != self.components.shape:
            raise GeometryInputError("切向量分量与基点维数不一致")

    def norm(self, spec: ManifoldSpec) -> float:
        g = spec.metric(self.base_point)
        return float(np.sqrt(self.components @ g @ self.components))

    def normalized(self, spec: ManifoldSpec) -> "TangentVector":
        length = self.norm(spec)
        if length == 0:
            raise GeometryInputError("零向量无法单位化")
        return TangentVector(self.base_point, self.components / length)

    def require_unit(self, spec: ManifoldSpec, tol: float = UNIT_TOL) -> None:
        length2 = self.norm(spec) ** 2
        if abs(length2 - 1.0) >= tol:
            raise GeometryInputError(f"需要单位向量, |g(v,v) - 1| = {abs(length2 - 1.0):.3e}")


@dataclass(frozen=True)
class OrthonormalFrame:
    """标准正交标架, vectors 的第 a 行为 E_{a+1} 的坐标分量"""
    base_point: np.ndarray
    vectors: np.ndarray
    adapted_rank: int = 0  # 前 adapted_rank 个向量为 v 及其结构像

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def vector(self, a: int) -> TangentVector:
        return TangentVector(self.base_point, self.vectors[a])

    def gram(self, spec: ManifoldSpec) -> np.ndarray:
        g = spec.metric(self.base_point)
        return self.vectors @ g @ self.vectors.T

    def orthonormality_error(self, spec: ManifoldSpec) -> float:
        return self.orthonormality_error_with(spec.metric(self.base_point))

    def orthonormality_error_with(self, g: np.ndarray) -> float:
        gram = self.vectors @ g @ self.vectors.T
        return float(np.max(np.abs(gram - np.eye(len(self)))))


@dataclass(frozen=True)
class ScalarField:
    """
    标量场

    jet_fn 接收坐标Jet, 返回标量Jet; role 为 phi (Bakry-Émery 势函数)、f (测试函数) 或 generic
    """
    jet_fn: FieldFunction
    role: str = "generic"
    label: str = ""
    expression: Optional[Expression] = None

    @classmethod
    def from_expression(cls, expr: Expression, role: str = "generic") -> "ScalarField":
        return cls(lambda x: evaluate_on(expr, x), role=role, label=str(expr), expression=expr)

    @classmethod
    def from_text(cls, text: str, dimension: int, role: str = "generic") -> "ScalarField":
        return cls.from_expression(parse_expression(text, dimension), role=role)

    @classmethod
    def zero(cls, role: str = "generic") -> "ScalarField":
        return cls(lambda x: Jet.constant(np.zeros(x.shape[:-1]), x.dim, x.order), role=role, label="0")

    def jet(self, spec: ManifoldSpec, p, order: int) -> Jet:
        return self.jet_fn(spec.coordinates(p, order))

    def value(self, spec: ManifoldSpec, p) -> np.ndarray:
        return self.jet(spec, p, 0).v


@dataclass(frozen=True)
class VectorField:
    """向量场, jet_fn 返回值形状 B + (d,) 的Jet"""
    jet_fn: FieldFunction
    label: str = ""
    is_zero: bool = False

    @classmethod
    def from_expressions(cls, exprs: Sequence[Expression]) -> "VectorField":
        exprs = tuple(exprs)
        label = "; ".join(str(e) for e in exprs)
        is_zero = all(e.is_zero() for e in exprs)
        return cls(lambda x: stack([evaluate_on(e, x) for e in exprs], axis=-1), label=label, is_zero=is_zero)

    @classmethod
    def from_texts(cls, texts: Sequence[str], dimension: int) -> "VectorField":
        if len(texts) != dimension:
            raise GeometryInputError(f"向量场需要 {dimension} 个分量, 实际 {len(texts)}")
        return cls.from_expressions([parse_expression(t, dimension) for t in texts])

    @classmethod
    def zero(cls) -> "VectorField":
        return cls(lambda x: Jet.constant(np.zeros(x.shape), x.dim, x.order), label="0", is_zero=True)

    @classmethod
    def constant(cls, components) -> "VectorField":
        c = np.asarray(components, dtype=float)
        is_zero = not np.any(c)
        return cls(
            lambda x: Jet.constant(np.broadcast_to(c, x.shape).copy(), x.dim, x.order),
            label=",".join(repr(float(a)) for a in c),
            is_zero=is_zero,
        )

    def jet(self, spec: ManifoldSpec, p, order: int) -> Jet:
        return self.jet_fn(spec.coordinates(p, order))

    def value(self, spec: ManifoldSpec, p) -> np.ndarray:
        return self.jet(spec, p, 0).v


def matrix_field_from_texts(rows: Sequence[Sequence[str]], dimension: int) -> FieldFunction:
    """由DSL字符串矩阵构造矩阵场"""
    exprs = [[parse_expression(t, dimension) for t in row] for row in rows]
    if len(exprs) != dimension or any(len(r) != dimension for r in exprs):
        raise GeometryInputError(f"矩阵场必须为 {dimension}×{dimension}")

    def fn(x: Jet) -> Jet:
        return stack([stack([evaluate_on(e, x) for e in row], axis=-1) for row in exprs], axis=-2)

    return fn


def symmetric_metric_from_texts(entries: Dict[Tuple[int, int], str], dimension: int) -> FieldFunction:
    """
    由上三角DSL分量构造对称度量场

    entries 的键为 (i, j) (1起始, i ≤ j), 缺省分量为 0
    """
    exprs: Dict[Tuple[int, int], Expression] = {}
    for (i, j), text in entries.items():
        if not (1 <= i <= dimension and 1 <= j <= dimension):
            raise GeometryInputError(f"度量分量下标越界: g{i}{j}")
        a, b = min(i, j), max(i, j)
        exprs[(a, b)] = parse_expression(str(text), dimension)

    def fn(x: Jet) -> Jet:
        zero = Jet.constant(np.zeros(x.shape[:-1]), x.dim, x.order)
        rows: List[Jet] = []
        for i in range(1, dimension + 1):
            row = []
            for j in range(1, dimension + 1):
                key = (min(i, j), max(i, j))
                row.append(evaluate_on(exprs[key], x) if key in exprs else zero)
            rows.append(stack(row, axis=-1))
        return stack(rows, axis=-2)

    return fn


def constant_matrix_field(matrix) -> FieldFunction:
    m = np.asarray(matrix, dtype=float)

    def fn(x: Jet) -> Jet:
        value = np.broadcast_to(m, x.shape[:-1] + m.shape).copy()
        return Jet.constant(value, x.dim, x.order)

    return fn


__all__ = [
    "ManifoldKind",
    "ChartDomain",
    "ManifoldSpec",
    "TangentVector",
    "OrthonormalFrame",
    "ScalarField",
    "VectorField",
    "FieldFunction",
    "matrix_field_from_texts",
    "symmetric_metric_from_texts",
    "constant_matrix_field",
    "UNIT_TOL",
    "FRAME_TOL",
]
