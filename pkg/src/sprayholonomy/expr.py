"""Closed-form expressions in the chart variables x1..xn, y1..yn.

Grammar (``^`` binds tightest and is right-associative; ``**`` is accepted
as an alias)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

Evaluation works over any scalar supporting arithmetic: floats, :class:`Jet`
and mpmath numbers. Domain violations raise :class:`ExprDomainError` naming
the offending subexpression instead of producing non-finite values.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

from .ad.jet import (
    Jet,
    jet_abs,
    jet_cos,
    jet_exp,
    jet_log,
    jet_pow_const,
    jet_sin,
    jet_sqrt,
)

FUNCTIONS = ("sqrt", "sin", "cos", "exp", "log", "abs")


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int, source: str = ""):
        self.position = position
        self.source = source
        super().__init__(f"{message} at position {position}")


class UnknownIdentifier(ExprError):
    pass


class VariableIndexError(ExprError):
    pass


class UnboundParameter(ExprError):
    pass


class ExprDomainError(ExprError):
    def __init__(self, subexpr: str, reason: str):
        self.subexpr = subexpr
        self.reason = reason
        super().__init__(f"{reason} in '{subexpr}'")


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "y"
    index: int  # 1-based


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Var, Param, Neg, BinOp, Call]


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),])"
    r")"
)
_VARNAME = re.compile(r"([xy])(\d+)$")


def _tokenize(source: str):
    pos = 0
    tokens = []
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        text = m.group(kind)
        if kind == "op" and text == "**":
            text = "^"
        tokens.append((kind, text, start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str, n: int, params):
        self.source = source
        self.n = n
        self.params = frozenset(params)
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, t, pos = self.take()
        if t != text or kind == "end":
            where = "end of input" if kind == "end" else repr(t)
            raise ExprSyntaxError(f"expected {text!r}, found {where}", pos, self.source)

    def parse(self) -> Node:
        node = self.expr()
        kind, t, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {t!r}", pos, self.source)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, t, _ = self.peek()
        if kind == "op" and t == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and t == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, t, pos = self.take()
        if kind == "num":
            return Const(float(t))
        if kind == "name":
            if t in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t, arg)
            m = _VARNAME.match(t)
            if m and t not in self.params:
                idx = int(m.group(2))
                if not 1 <= idx <= self.n:
                    raise VariableIndexError(
                        f"variable {t} out of range 1..{self.n} at position {pos}"
                    )
                return Var(m.group(1), idx)
            if t in self.params:
                return Param(t)
            raise UnknownIdentifier(f"unknown identifier {t!r} at position {pos}")
        if kind == "op" and t == "(":
            node = self.expr()
            self.expect(")")
            return node
        where = "end of input" if kind == "end" else repr(t)
        raise ExprSyntaxError(f"unexpected {where}", pos, self.source)


def parse(source: str, n: int, params=()) -> Node:
    """Parse ``source`` into an AST over chart dimension ``n``."""
    if n < 1:
        raise ValueError("dimension must be positive")
    return _Parser(source, n, params).parse()


# ---------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg) or (isinstance(node, Const) and node.value < 0):
        return 3
    return 5


def _fmt_const(v: float) -> str:
    v = float(v)
    if v < 0:
        # printed like a negation, which is how the parser reads it back
        return f"-{_fmt_const(-v)}"
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def to_source(node: Node) -> str:
    """Render an AST back to the surface syntax."""
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.arg)
        return "-" + (inner if _prec(node.arg) >= 3 else f"({inner})")
    p = _PREC[node.op]
    left = to_source(node.left)
    right = to_source(node.right)
    if node.op == "^":
        if _prec(node.left) <= 4:
            left = f"({left})"
        if _prec(node.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}" if p == 1 else f"{left}*{right}" if node.op == "*" else f"{left}/{right}"


def free_vars(node: Node) -> set[tuple[str, int]]:
    """Set of ``(kind, index)`` variables occurring in the tree."""
    out: set[tuple[str, int]] = set()
    stack = [node]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            out.add((cur.kind, cur.index))
        elif isinstance(cur, (Neg, Call)):
            stack.append(cur.arg)
        elif isinstance(cur, BinOp):
            stack.append(cur.left)
            stack.append(cur.right)
    return out


def params_used(node: Node) -> set[str]:
    out = set()
    stack = [node]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Param):
            out.add(cur.name)
        elif isinstance(cur, (Neg, Call)):
            stack.append(cur.arg)
        elif isinstance(cur, BinOp):
            stack.extend((cur.left, cur.right))
    return out


# ---------------------------------------------------------------- scalar ops


def _is_real(v) -> bool:
    return isinstance(v, (float, int))


def _mp():
    import mpmath

    return mpmath


def _sqrt(v):
    if isinstance(v, Jet):
        return jet_sqrt(v)
    if _is_real(v):
        return math.sqrt(v)
    if v < 0:
        raise ValueError("sqrt of negative value")
    return _mp().sqrt(v)


def _log(v):
    if isinstance(v, Jet):
        return jet_log(v)
    if _is_real(v):
        return math.log(v)
    if v <= 0:
        raise ValueError("log of non-positive value")
    return _mp().log(v)


def _exp(v):
    if isinstance(v, Jet):
        return jet_exp(v)
    if _is_real(v):
        return math.exp(v)
    return _mp().exp(v)


def _sin(v):
    if isinstance(v, Jet):
        return jet_sin(v)
    if _is_real(v):
        return math.sin(v)
    return _mp().sin(v)


def _cos(v):
    if isinstance(v, Jet):
        return jet_cos(v)
    if _is_real(v):
        return math.cos(v)
    return _mp().cos(v)


def _abs(v):
    if isinstance(v, Jet):
        return jet_abs(v)
    return abs(v)


_CALLS: dict[str, Callable] = {
    "sqrt": _sqrt,
    "log": _log,
    "exp": _exp,
    "sin": _sin,
    "cos": _cos,
    "abs": _abs,
}


def _pow(a, b):
    if isinstance(a, Jet) or isinstance(b, Jet):
        if isinstance(a, Jet) and not isinstance(b, Jet):
            return jet_pow_const(a, float(b))
        return a**b
    if _is_real(a) and _is_real(b):
        return math.pow(a, b)
    if a < 0 and b != int(b):
        raise ValueError("negative base with fractional exponent")
    if a == 0 and b < 0:
        raise ZeroDivisionError("zero to a negative power")
    return a**b


def _div(a, b):
    if not isinstance(b, Jet) and b == 0:
        raise ZeroDivisionError("division by zero")
    return a / b


_BINOPS: dict[str, Callable] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "^": _pow,
}

_DOMAIN_EXC = (ValueError, ZeroDivisionError, OverflowError)


def _check_finite(v, node):
    x = v.value if isinstance(v, Jet) else v
    try:
        finite = math.isfinite(x)
    except TypeError:
        finite = True
    if not finite:
        raise ExprDomainError(to_source(node), "non-finite value")
    return v


# ---------------------------------------------------------------- evaluation


def evaluate(
    node: Node,
    x: Sequence,
    y: Sequence,
    params: Mapping[str, float] | None = None,
):
    """Evaluate the tree at chart point (x, y) with the given parameter bindings."""
    params = params or {}

    def rec(nd):
        if isinstance(nd, Const):
            return nd.value
        if isinstance(nd, Var):
            return (x if nd.kind == "x" else y)[nd.index - 1]
        if isinstance(nd, Param):
            try:
                return params[nd.name]
            except KeyError:
                raise UnboundParameter(f"parameter {nd.name!r} is not bound") from None
        if isinstance(nd, Neg):
            return -rec(nd.arg)
        if isinstance(nd, Call):
            a = rec(nd.arg)
            try:
                return _check_finite(_CALLS[nd.func](a), nd)
            except _DOMAIN_EXC as exc:
                raise ExprDomainError(to_source(nd), str(exc)) from None
        a = rec(nd.left)
        b = rec(nd.right)
        try:
            return _check_finite(_BINOPS[nd.op](a, b), nd)
        except _DOMAIN_EXC as exc:
            raise ExprDomainError(to_source(nd), str(exc)) from None

    return rec(node)


def compile_expr(node: Node, params: Mapping[str, float] | None = None):
    """Compile the tree to a closure ``f(x, y)``; same arithmetic as :func:`evaluate`."""
    params = dict(params or {})

    def build(nd):
        if isinstance(nd, Const):
            c = nd.value
            return lambda x, y: c
        if isinstance(nd, Var):
            i = nd.index - 1
            if nd.kind == "x":
                return lambda x, y: x[i]
            return lambda x, y: y[i]
        if isinstance(nd, Param):
            if nd.name not in params:
                raise UnboundParameter(f"parameter {nd.name!r} is not bound")
            c = params[nd.name]
            return lambda x, y: c
        if isinstance(nd, Neg):
            f = build(nd.arg)
            return lambda x, y: -f(x, y)
        if isinstance(nd, Call):
            f = build(nd.arg)
            g = _CALLS[nd.func]

            def call(x, y, f=f, g=g, nd=nd):
                a = f(x, y)
                try:
                    return _check_finite(g(a), nd)
                except _DOMAIN_EXC as exc:
                    raise ExprDomainError(to_source(nd), str(exc)) from None

            return call
        fl = build(nd.left)
        fr = build(nd.right)
        if nd.op == "+":
            return lambda x, y: fl(x, y) + fr(x, y)
        if nd.op == "-":
            return lambda x, y: fl(x, y) - fr(x, y)
        if nd.op == "*":
            return lambda x, y: fl(x, y) * fr(x, y)
        op = _BINOPS[nd.op]

        def binop(x, y, op=op, nd=nd):
            a = fl(x, y)
            b = fr(x, y)
            try:
                return _check_finite(op(a, b), nd)
            except _DOMAIN_EXC as exc:
                raise ExprDomainError(to_source(nd), str(exc)) from None

        return binop

    body = build(node)

    def compiled(x, y):
        return _check_finite(body(x, y), node)

    return compiled
