"""
度量分量与标量场表达式语言

递归下降解析器, 语法 (EBNF):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' factor)?              # 右结合
    atom   := number | ident '(' expr ')' | var | '(' expr ')' | '-' atom
    var    := 'x' digits

函数: sin, cos, tan, exp, log, sqrt。空白无意义。
AST 为冻结数据类, 相等即结构相等; evaluate_jet 在Jet算术上求值, 得到精确到三阶的导数。
"""

import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, FrozenSet, List, Optional, Union

import numpy as np

from kahler_toolkit.core.errors import DSLDomainError, DSLNameError, DSLSyntaxError
from kahler_toolkit.core.logger import get_logger
from kahler_toolkit.geometry.jet import Jet

logger = get_logger(__name__)

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")


class TokenType(Enum):
    NUMBER = "number"
    IDENT = "ident"
    VAR = "var"
    PLUS = "+"
    MINUS = "-"
    STAR = "*"
    SLASH = "/"
    CARET = "^"
    LPAREN = "("
    RPAREN = ")"
    EOF = "end of input"


@dataclass(frozen=True)
class Token:
    type: TokenType
    text: str
    offset: int


_NUMBER_RE = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_VAR_RE = re.compile(r"x(\d+)")
_SYMBOLS = {
    "+": TokenType.PLUS,
    "-": TokenType.MINUS,
    "*": TokenType.STAR,
    "/": TokenType.SLASH,
    "^": TokenType.CARET,
    "(": TokenType.LPAREN,
    ")": TokenType.RPAREN,
}

_ATOM_START = ("number", "function", "variable", "(", "-")


def tokenize(text: str) -> List[Token]:
    """切分记号, offset 为UTF-8字节偏移"""
    tokens: List[Token] = []
    pos = 0

    def byte_offset(i: int) -> int:
        return len(text[:i].encode("utf-8"))

    while pos < len(text):
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch in _SYMBOLS:
            tokens.append(Token(_SYMBOLS[ch], ch, byte_offset(pos)))
            pos += 1
            continue
        m = _NUMBER_RE.match(text, pos)
        if m:
            tokens.append(Token(TokenType.NUMBER, m.group(0), byte_offset(pos)))
            pos = m.end()
            continue
        m = _IDENT_RE.match(text, pos)
        if m:
            word = m.group(0)
            kind = TokenType.VAR if _VAR_RE.fullmatch(word) else TokenType.IDENT
            tokens.append(Token(kind, word, byte_offset(pos)))
            pos = m.end()
            continue
        raise DSLSyntaxError(f"无法识别的字符 {ch!r}", text, byte_offset(pos), _ATOM_START)
    tokens.append(Token(TokenType.EOF, "", byte_offset(len(text))))
    return tokens


# ---------------------------------------------------------------------- AST

@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1..d


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Number, Var, Neg, BinOp, Call]


def pretty(node: Node) -> str:
    """规范化打印: 二元运算全部加括号, 解析后得到相同的AST"""
    if isinstance(node, Number):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"-({pretty(node.operand)})"
    if isinstance(node, BinOp):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    raise TypeError(f"未知节点类型: {type(node).__name__}")


def variables_of(node: Node) -> FrozenSet[int]:
    if isinstance(node, Var):
        return frozenset({node.index})
    if isinstance(node, Number):
        return frozenset()
    if isinstance(node, (Neg, Call)):
        return variables_of(node.operand if isinstance(node, Neg) else node.arg)
    return variables_of(node.left) | variables_of(node.right)


@dataclass(frozen=True)
class Expression:
    """已解析的表达式, 绑定坐标卡维数"""

    root: Node
    dimension: int
    text: str = ""

    def variables(self) -> FrozenSet[int]:
        return variables_of(self.root)

    def is_constant(self) -> bool:
        return not self.variables()

    def is_zero(self) -> bool:
        """不含变量且取值恒为 0 (如 "0", "-0", "0*2")"""
        if not self.is_constant():
            return False
        try:
            return float(evaluate_jet(self, np.zeros(self.dimension), 0).v) == 0.0
        except DSLDomainError:
            return False

    def pretty(self) -> str:
        return pretty(self.root)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Expression):
            return NotImplemented
        return self.root == other.root and self.dimension == other.dimension

    def __hash__(self) -> int:
        return hash((self.root, self.dimension))

    def __str__(self) -> str:
        return self.text or self.pretty()


# ---------------------------------------------------------------------- 解析器

class _Parser:
    def __init__(self, text: str, dimension: int):
        self.text = text
        self.dimension = dimension
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, expected) -> None:
        raise DSLSyntaxError(message, self.text, self.current.offset, expected)

    def expect(self, kind: TokenType) -> Token:
        if self.current.type is not kind:
            found = self.current.text or self.current.type.value
            self.fail(f"意外的记号 {found!r}", [kind.value])
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.current.type is not TokenType.EOF:
            self.fail(f"多余的记号 {self.current.text!r}", ["+", "-", "*", "/", "^", "end of input"])
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.current.type in (TokenType.PLUS, TokenType.MINUS):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.current.type in (TokenType.STAR, TokenType.SLASH):
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        base = self.atom()
        if self.current.type is TokenType.CARET:
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Node:
        tok = self.current
        if tok.type is TokenType.NUMBER:
            self.advance()
            return Number(float(tok.text))
        if tok.type is TokenType.VAR:
            self.advance()
            index = int(tok.text[1:])
            if not 1 <= index <= self.dimension:
                raise DSLNameError(
                    f"变量下标越界: {tok.text} (维数 {self.dimension}, 位置 {tok.offset})",
                    offset=tok.offset,
                )
            return Var(index)
        if tok.type is TokenType.IDENT:
            if tok.text not in FUNCTIONS:
                raise DSLNameError(f"未知标识符: {tok.text} (位置 {tok.offset})", offset=tok.offset)
            self.advance()
            self.expect(TokenType.LPAREN)
            arg = self.expr()
            self.expect(TokenType.RPAREN)
            return Call(tok.text, arg)
        if tok.type is TokenType.LPAREN:
            self.advance()
            node = self.expr()
            self.expect(TokenType.RPAREN)
            return node
        if tok.type is TokenType.MINUS:
            self.advance()
            return Neg(self.atom())
        found = tok.text or tok.type.value
        self.fail(f"意外的记号 {found!r}", _ATOM_START)
        raise AssertionError("unreachable")


def parse_expression(text: str, dimension: int) -> Expression:
    """
    解析表达式

    Args:
        text: 表达式文本, 非空
        dimension: 坐标卡维数 d ≥ 1, 变量为 x1..xd

    Raises:
        DSLSyntaxError: 语法错误 (字节偏移 + 期望记号集合)
        DSLNameError: 未知标识符或变量下标越界
    """
    if dimension < 1:
        raise DSLNameError(f"维数必须 ≥ 1: {dimension}")
    if not text or not text.strip():
        raise DSLSyntaxError("表达式为空", text or "", 0, _ATOM_START)
    root = _Parser(text, dimension).parse()
    return Expression(root, dimension, text)


# ---------------------------------------------------------------------- 求值

_UNARY: Dict[str, Callable[[Jet], Jet]] = {
    "sin": Jet.sin,
    "cos": Jet.cos,
    "tan": Jet.tan,
    "exp": Jet.exp,
    "log": Jet.log,
    "sqrt": Jet.sqrt,
}


def _constant_value(node: Node, dim: int) -> float:
    jet = _eval(node, Jet.constant(np.zeros(dim), dim, 0))
    return float(jet.v)


def _eval(node: Node, x: Jet) -> Jet:
    try:
        result = _eval_node(node, x)
    except DSLDomainError as e:
        if e.subexpression:
            raise
        raise DSLDomainError(e.message, pretty(node)) from e
    if not result.is_finite():
        raise DSLDomainError("求值得到非有限值", pretty(node))
    return result


def _eval_node(node: Node, x: Jet) -> Jet:
    if isinstance(node, Number):
        return Jet.constant(node.value, x.dim, x.order)
    if isinstance(node, Var):
        return x[..., node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.operand, x)
    if isinstance(node, Call):
        return _UNARY[node.func](_eval(node.arg, x))
    left = _eval(node.left, x)
    if node.op == "^" and not variables_of(node.right):
        return left.power(_constant_value(node.right, x.dim))
    right = _eval(node.right, x)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        return left / right
    if node.op == "^":
        if np.any(left.v <= 0):
            raise DSLDomainError("变指数幂要求底数为正")
        return (right * left.log()).exp()
    raise ValueError(f"未知运算符: {node.op}")


def evaluate_jet(expr: Expression, point, order: int) -> Jet:
    """
    在给定点求表达式的Jet

    Args:
        expr: 已解析表达式
        point: 坐标, 形状 (d,) 或带批量维度 (..., d)
        order: 导数阶数 0..3

    Returns:
        值形状为批量形状的Jet

    Raises:
        DSLDomainError: 除零、非正数取对数等, 指明出错的子表达式
    """
    if not 0 <= order <= 3:
        raise ValueError(f"阶数必须在 0..3 之间: {order}")
    p = np.asarray(point, dtype=float)
    if p.shape[-1:] != (expr.dimension,):
        raise DSLNameError(f"点的维数 {p.shape[-1:]} 与表达式维数 {expr.dimension} 不一致")
    return evaluate_on(expr, Jet.coordinates(p, order))


def evaluate_on(expr: Expression, x: Jet) -> Jet:
    """在坐标Jet x (值形状 B + (d,)) 上求值, 结果形状为 B"""
    if x.shape[-1:] != (expr.dimension,):
        raise DSLNameError(f"坐标维数 {x.shape[-1:]} 与表达式维数 {expr.dimension} 不一致")
    result = _eval(expr.root, x)
    batch = x.shape[:-1]
    if result.shape != batch:
        result = result + Jet.constant(np.zeros(batch), x.dim, x.order)
    return result


def evaluate(expr: Expression, point) -> np.ndarray:
    """仅求值 (零阶)"""
    return evaluate_jet(expr, point, 0).v


# ---------------------------------------------------------------------- 随机表达式

def random_expression(rng: np.random.Generator, dimension: int, depth: int = 6) -> Expression:
    """生成随机表达式 (属性测试用), 深度不超过 depth"""

    def build(level: int) -> Node:
        if level <= 0 or rng.random() < 0.25:
            if rng.random() < 0.6:
                return Var(int(rng.integers(1, dimension + 1)))
            return Number(round(float(rng.uniform(0.1, 3.0)), 3))
        pick = rng.random()
        if pick < 0.55:
            op = ["+", "-", "*", "/"][int(rng.integers(0, 4))]
            return BinOp(op, build(level - 1), build(level - 1))
        if pick < 0.65:
            return BinOp("^", build(level - 1), Number(float(rng.integers(1, 4))))
        if pick < 0.75:
            return Neg(build(level - 1))
        func = FUNCTIONS[int(rng.integers(0, len(FUNCTIONS)))]
        return Call(func, build(level - 1))

    root = build(depth)
    return Expression(root, dimension, pretty(root))


def random_polynomial(
    rng: np.random.Generator,
    dimension: int,
    degree: int = 3,
    terms: int = 6,
) -> Expression:
    """随机多项式 (次数 ≤ degree), 总含一次项以保证梯度一般非零"""
    parts: List[str] = []
    for i in range(1, dimension + 1):
        parts.append(f"{rng.uniform(-1, 1):.6f}*x{i}")
    for _ in range(terms):
        deg = int(rng.integers(2, degree + 1))
        idx = rng.integers(1, dimension + 1, size=deg)
        monomial = "*".join(f"x{i}" for i in idx)
        parts.append(f"{rng.uniform(-1, 1):.6f}*{monomial}")
    text = " + ".join(parts).replace("+ -", "- ")
    return parse_expression(text, dimension)


def scaled(expr: Expression, factor: float) -> Expression:
    """表达式乘以常数"""
    coef: Node = Number(abs(float(factor)))
    if factor < 0:
        coef = Neg(coef)
    root = BinOp("*", coef, expr.root)
    return Expression(root, expr.dimension, pretty(root))


__all__ = [
    "FUNCTIONS",
    "TokenType",
    "Token",
    "tokenize",
    "Number",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Node",
    "Expression",
    "pretty",
    "parse_expression",
    "evaluate_jet",
    "evaluate",
    "evaluate_on",
    "random_expression",
    "random_polynomial",
    "scaled",
]
