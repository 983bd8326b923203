"""
截断Taylor喷射 (Jet) 算术

前向模式自动微分, 精确到三阶混合偏导。一个 Jet 可以是标量、向量或矩阵值,
还可以带批量维度: 值数组形状为 S, 各阶导数在 S 之前附加前导的导数轴:

    v  : S
    d1 : (d,) + S          d1[i]      = ∂_i
    d2 : (d, d) + S        d2[i,j]    = ∂_i∂_j
    d3 : (d, d, d) + S     d3[i,j,k]  = ∂_i∂_j∂_k

高于 order 的导数为 None。所有运算返回新对象, 不做原地修改。
"""

from math import prod
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from kahler_toolkit.core.errors import DSLDomainError

MAX_ORDER = 3
ARCCOS_SLACK = 1e-12  # 仅0阶: 舍入造成的微小越界截断到 ±1

ArrayLike = Union[float, int, np.ndarray]
BilinearOp = Callable[[np.ndarray, np.ndarray], np.ndarray]


class Jet:
    """带导数的数组值, 导数轴前置"""

    __slots__ = ("dim", "order", "v", "d1", "d2", "d3")

    def __init__(
        self,
        v: ArrayLike,
        d1: Optional[np.ndarray] = None,
        d2: Optional[np.ndarray] = None,
        d3: Optional[np.ndarray] = None,
        dim: Optional[int] = None,
    ):
        self.v = np.asarray(v, dtype=float)
        self.d1 = d1
        self.d2 = d2 if d1 is not None else None
        self.d3 = d3 if self.d2 is not None else None
        if d1 is not None:
            dim = d1.shape[0]
        if dim is None:
            raise ValueError("零阶Jet必须显式给出维数")
        self.dim = int(dim)
        self.order = sum(x is not None for x in (self.d1, self.d2, self.d3))

    # ------------------------------------------------------------------ 构造

    @classmethod
    def constant(cls, value: ArrayLike, dim: int, order: int) -> "Jet":
        """常值Jet, 所有导数为零"""
        v = np.asarray(value, dtype=float)
        levels = [np.zeros((dim,) * n + v.shape) for n in range(1, order + 1)]
        return cls(v, *levels, dim=dim)

    @classmethod
    def coordinates(cls, point: ArrayLike, order: int) -> "Jet":
        """
        坐标函数 x_1..x_d 的Jet

        point 形状 B + (d,), 返回的Jet值形状与之相同, d1[k, ..., i] = δ_ki
        """
        x = np.asarray(point, dtype=float)
        d = x.shape[-1]
        batch = x.shape[:-1]
        levels = []
        if order >= 1:
            eye = np.eye(d).reshape((d,) + (1,) * len(batch) + (d,))
            levels.append(np.broadcast_to(eye, (d,) + x.shape))
        for n in range(2, order + 1):
            levels.append(np.zeros((d,) * n + x.shape))
        return cls(x, *levels, dim=d)

    # ------------------------------------------------------------------ 基本属性

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.v.shape

    @property
    def ndim(self) -> int:
        return self.v.ndim

    def levels(self) -> List[np.ndarray]:
        return [x for x in (self.v, self.d1, self.d2, self.d3) if x is not None]

    def truncate(self, order: int) -> "Jet":
        """降到给定阶数"""
        if order >= self.order:
            return self
        lv = self.levels()[: order + 1]
        return Jet(*lv, dim=self.dim)

    def derivative(self, n: int) -> np.ndarray:
        """第 n 阶导数, 导数轴移到末尾: 形状 S + (d,)*n"""
        if n == 0:
            return self.v
        if n > self.order:
            raise ValueError(f"Jet阶数 {self.order} 不含 {n} 阶导数")
        arr = self.levels()[n]
        return np.moveaxis(arr, list(range(n)), list(range(arr.ndim - n, arr.ndim)))

    def partials(self) -> "Jet":
        """
        一阶偏导构成的Jet, 值形状 S + (d,), 阶数减一

        用于由 f 的Jet得到 df 的Jet (再参与后续运算)
        """
        if self.order < 1:
            raise ValueError("零阶Jet没有偏导")
        v = np.moveaxis(self.d1, 0, -1)
        d1 = np.moveaxis(self.d2, 1, -1) if self.d2 is not None else None
        d2 = np.moveaxis(self.d3, 2, -1) if self.d3 is not None else None
        return Jet(v, d1, d2, dim=self.dim)

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(x))) for x in self.levels())

    # ------------------------------------------------------------------ 形状与线性变换

    def _pad_to(self, ndim: int) -> "Jet":
        """在导数轴之后补单元素轴, 使值的维数达到 ndim"""
        extra = ndim - self.ndim
        if extra <= 0:
            return self
        out = []
        for n, x in enumerate(self.levels()):
            out.append(x.reshape(x.shape[:n] + (1,) * extra + x.shape[n:]))
        return Jet(*out, dim=self.dim)

    def linear(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Jet":
        """对各阶同时施加只作用于末尾轴的线性映射"""
        return Jet(*[fn(x) for x in self.levels()], dim=self.dim)

    def __getitem__(self, index) -> "Jet":
        if not isinstance(index, tuple):
            index = (index,)
        out = []
        for n, x in enumerate(self.levels()):
            out.append(x[(slice(None),) * n + index])
        return Jet(*out, dim=self.dim)

    @property
    def T(self) -> "Jet":
        return self.linear(lambda x: np.swapaxes(x, -1, -2))

    def sum(self, axis: Union[int, Tuple[int, ...]] = -1) -> "Jet":
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        if any(a >= 0 for a in axes):
            raise ValueError("Jet.sum 只接受负轴号")
        return self.linear(lambda x: x.sum(axis=axes))

    def trace(self) -> "Jet":
        return self.linear(lambda x: np.trace(x, axis1=-2, axis2=-1))

    def reshape_value(self, shape: Tuple[int, ...]) -> "Jet":
        out = []
        for n, x in enumerate(self.levels()):
            out.append(x.reshape(x.shape[:n] + tuple(shape)))
        return Jet(*out, dim=self.dim)

    # ------------------------------------------------------------------ 算术

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.dim != self.dim:
                raise ValueError(f"Jet维数不一致: {self.dim} vs {other.dim}")
            return other
        return Jet.constant(other, self.dim, self.order)

    def __neg__(self) -> "Jet":
        return self.linear(np.negative)

    def __pos__(self) -> "Jet":
        return self

    def __add__(self, other) -> "Jet":
        if np.isscalar(other):
            return Jet(self.v + other, self.d1, self.d2, self.d3, dim=self.dim)
        a, b = _align(self, self._lift(other))
        order = min(a.order, b.order)
        return Jet(*[x + y for x, y in zip(a.levels()[: order + 1], b.levels()[: order + 1])],
                   dim=self.dim)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        if np.isscalar(other):
            return self.linear(lambda x: x * other)
        a, b = _align(self, self._lift(other))
        return _product(a, b, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if np.isscalar(other):
            if other == 0:
                raise DSLDomainError("除数为零")
            return self * (1.0 / other)
        return self * self._lift(other).reciprocal()

    def __rtruediv__(self, other) -> "Jet":
        return self.reciprocal() * other

    def __pow__(self, exponent) -> "Jet":
        if isinstance(exponent, Jet):
            return (exponent * self.log()).exp()
        return self.power(float(exponent))

    # ------------------------------------------------------------------ 初等函数

    def exp(self) -> "Jet":
        e = np.exp(self.v)
        return _compose(self, [e, e, e, e])

    def log(self) -> "Jet":
        if np.any(self.v <= 0):
            raise DSLDomainError("对非正数取对数")
        v = self.v
        return _compose(self, [np.log(v), 1.0 / v, -1.0 / v**2, 2.0 / v**3])

    def sqrt(self) -> "Jet":
        v = self.v
        if np.any(v < 0):
            raise DSLDomainError("对负数开平方")
        if self.order >= 1 and np.any(v == 0):
            raise DSLDomainError("零点处平方根不可微")
        s = np.sqrt(v)
        if self.order == 0:
            return Jet(s, dim=self.dim)
        return _compose(self, [s, 0.5 / s, -0.25 / (v * s), 0.375 / (v * v * s)])

    def sin(self) -> "Jet":
        s, c = np.sin(self.v), np.cos(self.v)
        return _compose(self, [s, c, -s, -c])

    def cos(self) -> "Jet":
        s, c = np.sin(self.v), np.cos(self.v)
        return _compose(self, [c, -s, -c, s])

    def tan(self) -> "Jet":
        t = np.tan(self.v)
        sec2 = 1.0 + t * t
        return _compose(self, [t, sec2, 2.0 * t * sec2, 2.0 * sec2 * (1.0 + 3.0 * t * t)])

    def arctan(self) -> "Jet":
        v = self.v
        q = 1.0 + v * v
        return _compose(self, [np.arctan(v), 1.0 / q, -2.0 * v / q**2, (6.0 * v * v - 2.0) / q**3])

    def arccos(self) -> "Jet":
        v = self.v
        if self.order == 0 and np.all(np.abs(v) <= 1.0 + ARCCOS_SLACK):
            v = np.clip(v, -1.0, 1.0)
        if np.any(np.abs(v) > 1):
            raise DSLDomainError("arccos 参数超出 [-1, 1]")
        if self.order >= 1 and np.any(np.abs(v) == 1):
            raise DSLDomainError("arccos 在 ±1 处不可微")
        w = 1.0 - v * v
        r = 1.0 / np.sqrt(w) if self.order >= 1 else None
        if r is None:
            return Jet(np.arccos(v), dim=self.dim)
        return _compose(
            self,
            [np.arccos(v), -r, -v * r / w, -(1.0 + 2.0 * v * v) * r / (w * w)],
        )

    def reciprocal(self) -> "Jet":
        v = self.v
        if np.any(v == 0):
            raise DSLDomainError("除数为零")
        inv = 1.0 / v
        return _compose(self, [inv, -inv**2, 2.0 * inv**3, -6.0 * inv**4])

    def power(self, p: float) -> "Jet":
        """常数指数幂, 使用下降阶乘系数, 系数为零的项直接置零"""
        v = self.v
        integral = float(p).is_integer()
        if not integral and np.any(v < 0):
            raise DSLDomainError("负数的非整数次幂")
        derivs = []
        for j in range(self.order + 1):
            coef = prod(p - i for i in range(j))
            if coef == 0:
                derivs.append(np.zeros_like(v))
                continue
            if p - j < 0 and np.any(v == 0):
                raise DSLDomainError("零的负数次幂")
            derivs.append(coef * np.power(v, p - j))
        return _compose(self, derivs + [None] * (4 - len(derivs)))

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, dim={self.dim}, shape={self.shape})"


# ---------------------------------------------------------------------- 内部工具

def _align(a: Jet, b: Jet) -> Tuple[Jet, Jet]:
    nd = max(a.ndim, b.ndim)
    return a._pad_to(nd), b._pad_to(nd)


def _product(f: Jet, g: Jet, op: BilinearOp) -> Jet:
    """双线性乘积的Leibniz法则, op 作用于 (导数轴..., S) 形状的数组"""
    order = min(f.order, g.order)
    v = op(f.v, g.v)
    if order == 0:
        return Jet(v, dim=f.dim)
    d1 = op(f.d1, g.v) + op(f.v, g.d1)
    d2 = d3 = None
    if order >= 2:
        d2 = (
            op(f.d2, g.v)
            + op(f.d1[:, None], g.d1[None])
            + op(f.d1[None], g.d1[:, None])
            + op(f.v, g.d2)
        )
    if order >= 3:
        d3 = (
            op(f.d3, g.v)
            + op(f.d2[:, :, None], g.d1[None, None])
            + op(f.d2[:, None, :], g.d1[None, :, None])
            + op(f.d2[None, :, :], g.d1[:, None, None])
            + op(f.d1[:, None, None], g.d2[None])
            + op(f.d1[None, :, None], g.d2[:, None, :])
            + op(f.d1[None, None, :], g.d2[:, :, None])
            + op(f.v, g.d3)
        )
    return Jet(v, d1, d2, d3, dim=f.dim)


def _compose(f: Jet, phi: Sequence[Optional[np.ndarray]]) -> Jet:
    """逐元素函数复合, phi = [φ, φ', φ'', φ'''] 在 f.v 处的取值"""
    v = phi[0]
    if f.order == 0:
        return Jet(v, dim=f.dim)
    d1 = phi[1] * f.d1
    d2 = d3 = None
    if f.order >= 2:
        d2 = phi[2] * (f.d1[:, None] * f.d1[None]) + phi[1] * f.d2
    if f.order >= 3:
        a, b, c = f.d1[:, None, None], f.d1[None, :, None], f.d1[None, None, :]
        d3 = (
            phi[3] * (a * b * c)
            + phi[2] * (f.d2[:, :, None] * c + f.d2[:, None, :] * b + f.d2[None, :, :] * a)
            + phi[1] * f.d3
        )
    return Jet(v, d1, d2, d3, dim=f.dim)


def _core_ndims(spec: str) -> Tuple[List[int], int]:
    inputs, output = spec.replace(" ", "").split("->")
    cores = [len(term.replace("...", "")) for term in inputs.split(",")]
    return cores, len(output.replace("...", ""))


# ---------------------------------------------------------------------- 公共运算

def einsum(spec: str, *operands: Union[Jet, np.ndarray]) -> Jet:
    """
    Jet版 einsum, 各操作数下标须以 '...' 开头 (批量维度)

    例: einsum('...ij,...jk->...ik', A, B)。多个操作数按从左到右两两收缩。
    """
    inputs, output = spec.replace(" ", "").split("->")
    terms = inputs.split(",")
    if len(terms) != len(operands):
        raise ValueError("einsum 下标数量与操作数不一致")
    if len(terms) == 1:
        (x,) = operands
        return x.linear(lambda a: np.einsum(f"{terms[0]}->{output}", a))

    dim = next(o.dim for o in operands if isinstance(o, Jet))
    order = min(o.order for o in operands if isinstance(o, Jet))
    jets = [o if isinstance(o, Jet) else Jet.constant(o, dim, order) for o in operands]

    acc, acc_term = jets[0], terms[0]
    for pos in range(1, len(terms)):
        term = terms[pos]
        if pos == len(terms) - 1:
            out_term = output
        else:
            remaining = set("".join(terms[pos + 1:]) + output)
            letters = [c for c in (acc_term + term).replace(".", "") if c in remaining]
            out_term = "..." + "".join(dict.fromkeys(letters))
        acc = _einsum_pair(f"{acc_term},{term}->{out_term}", acc, jets[pos])
        acc_term = out_term
    return acc


def _einsum_pair(spec: str, a: Jet, b: Jet) -> Jet:
    (ca, cb), _ = _core_ndims(spec)
    ba, bb = a.ndim - ca, b.ndim - cb
    nb = max(ba, bb)
    a = _pad_batch(a, nb - ba)
    b = _pad_batch(b, nb - bb)
    return _product(a, b, lambda x, y: np.einsum(spec, x, y))


def _pad_batch(x: Jet, extra: int) -> Jet:
    if extra <= 0:
        return x
    return x._pad_to(x.ndim + extra)


def matmul(a: Jet, b: Jet) -> Jet:
    return einsum("...ij,...jk->...ik", a, b)


def matvec(a: Jet, x: Jet) -> Jet:
    return einsum("...ij,...j->...i", a, x)


def inner(g: Union[Jet, np.ndarray], x: Jet, y: Jet) -> Jet:
    """度量内积 g(x, y)"""
    return einsum("...i,...ij,...j->...", x, g, y)


def inverse(a: Jet) -> Jet:
    """
    矩阵Jet求逆

    记 A = A0 + δ (δ 的值为零), 则截断到 order 阶时
    A^{-1} = Σ_{m=0}^{order} (-A0^{-1} δ)^m A0^{-1} 精确成立。
    """
    a0_inv = np.linalg.inv(a.v)
    result = Jet.constant(a0_inv, a.dim, a.order)
    if a.order == 0:
        return result
    delta = Jet(np.zeros_like(a.v), a.d1, a.d2, a.d3, dim=a.dim)
    step = matmul(Jet.constant(-a0_inv, a.dim, a.order), delta)
    term = result
    for _ in range(a.order):
        term = matmul(step, term)
        result = result + term
    return result


def stack(jets: Sequence[Jet], axis: int = -1) -> Jet:
    """沿负轴堆叠若干Jet (值形状须可广播一致)"""
    if axis >= 0:
        raise ValueError("stack 只接受负轴号")
    order = min(j.order for j in jets)
    nd = max(j.ndim for j in jets)
    padded = [j.truncate(order)._pad_to(nd) for j in jets]
    out = []
    for n in range(order + 1):
        arrays = [p.levels()[n] for p in padded]
        shape = np.broadcast_shapes(*[x.shape for x in arrays])
        out.append(np.stack([np.broadcast_to(x, shape) for x in arrays], axis=axis))
    return Jet(*out, dim=jets[0].dim)


def finite_difference_partials(
    fn: Callable[[np.ndarray], float],
    point: ArrayLike,
    order: int,
    h: float = 1e-3,
) -> List[np.ndarray]:
    """
    四阶中心差分偏导 (交叉校验用)

    返回 [值, 梯度, Hessian] 中前 order+1 项, order ≤ 2
    """
    x0 = np.asarray(point, dtype=float)
    d = x0.size
    eye = np.eye(d)
    out: List[np.ndarray] = [np.asarray(fn(x0), dtype=float)]
    weights = ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0))

    def first(f, x, i):
        return sum(w * f(x + s * h * eye[i]) for s, w in weights) / (12.0 * h)

    if order >= 1:
        out.append(np.array([first(fn, x0, i) for i in range(d)]))
    if order >= 2:
        hess = np.empty((d, d))
        for i in range(d):
            for j in range(i, d):
                hess[i, j] = hess[j, i] = first(lambda y: first(fn, y, j), x0, i)
        out.append(hess)
    return out


__all__ = [
    "Jet",
    "MAX_ORDER",
    "einsum",
    "matmul",
    "matvec",
    "inner",
    "inverse",
    "stack",
    "finite_difference_partials",
]
