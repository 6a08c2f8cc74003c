"""Scalar-field expressions over named coordinates with exact differentiation.

Expressions are immutable trees built from constants, coordinate symbols,
arithmetic (+, -, *, /), powers with rational exponents, and the functions
sqrt, sin, cos, exp, log, abs, sign.  Differentiation is closed on this
grammar (abs differentiates to sign, which is undefined at 0), so
derivatives of any order stay exact.  Derivative trees share subtrees with
their parents; evaluation memoizes per call so shared nodes cost once.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Callable, Mapping, Sequence, Union

from .errors import DimensionMismatch, ParseError, UnknownIdentifier

Number = Union[int, float, Fraction]

__all__ = [
    "FieldExpr",
    "parse_field",
    "differentiate",
    "evaluate",
    "sqrt",
    "call",
]


# --------------------------------------------------------------------------
# expression nodes
# --------------------------------------------------------------------------

class Node:
    __slots__ = ()

    def __repr__(self):
        return _source(self)


class Const(Node):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value  # Fraction (exact) or float


class Coord(Node):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name


class Add(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b


class Sub(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b


class Mul(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b


class Div(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b


class Neg(Node):
    __slots__ = ("a",)

    def __init__(self, a):
        self.a = a


class Pow(Node):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent: Fraction):
        self.base = base
        self.exponent = exponent  # always a Fraction


class Call(Node):
    __slots__ = ("fn", "arg")

    def __init__(self, fn: str, arg):
        self.fn = fn
        self.arg = arg


def _is_const(node, value=None) -> bool:
    if not isinstance(node, Const):
        return False
    return value is None or node.value == value


# --------------------------------------------------------------------------
# smart constructors: fold literals, prune zero/one products
# --------------------------------------------------------------------------

def _const(value) -> Const:
    if isinstance(value, int):
        value = Fraction(value)
    return Const(value)


def _fold2(a, b, frac_op, float_op):
    av, bv = a.value, b.value
    if isinstance(av, Fraction) and isinstance(bv, Fraction):
        return _const(frac_op(av, bv))
    return Const(float_op(float(av), float(bv)))


def _add(a, b):
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold2(a, b, lambda x, y: x + y, lambda x, y: x + y)
    return Add(a, b)


def _sub(a, b):
    if _is_const(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold2(a, b, lambda x, y: x - y, lambda x, y: x - y)
    if _is_const(a, 0):
        return _neg(b)
    return Sub(a, b)


def _mul(a, b):
    if _is_const(a, 0) or _is_const(b, 0):
        return _const(0)
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold2(a, b, lambda x, y: x * y, lambda x, y: x * y)
    return Mul(a, b)


def _div(a, b):
    if _is_const(b, 1):
        return a
    if _is_const(a, 0) and not _is_const(b, 0):
        return _const(0)
    if isinstance(a, Const) and isinstance(b, Const) and not _is_const(b, 0):
        return _fold2(a, b, lambda x, y: x / y, lambda x, y: x / y)
    return Div(a, b)


def _neg(a):
    if isinstance(a, Const):
        return _const(-a.value) if isinstance(a.value, Fraction) else Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def _pow(base, exponent: Fraction):
    exponent = Fraction(exponent)
    if exponent == 0:
        return _const(1)
    if exponent == 1:
        return base
    if isinstance(base, Const) and exponent.denominator == 1:
        q = int(exponent)
        v = base.value
        if isinstance(v, Fraction) and not (v == 0 and q < 0):
            return _const(v ** q)
        if isinstance(v, float):
            return Const(_safe_pow(v, float(q)))
    return Pow(base, exponent)


def _call(fn: str, arg):
    if isinstance(arg, Const):
        return Const(_FN_EVAL[fn](float(arg.value)))
    return Call(fn, arg)


# --------------------------------------------------------------------------
# IEEE-style evaluation: non-finite values propagate instead of raising
# --------------------------------------------------------------------------

def _safe_sqrt(v):
    return math.sqrt(v) if v >= 0.0 else math.nan


def _safe_log(v):
    if v > 0.0:
        return math.log(v)
    return -math.inf if v == 0.0 else math.nan


def _safe_exp(v):
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def _sign(v):
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


_FN_EVAL: dict[str, Callable[[float], float]] = {
    "sqrt": _safe_sqrt,
    "sin": math.sin,
    "cos": math.cos,
    "exp": _safe_exp,
    "log": _safe_log,
    "abs": math.fabs,
    "sign": _sign,
}


def _safe_pow(base: float, expo: float) -> float:
    if expo == int(expo):
        try:
            return base ** int(expo)
        except (ZeroDivisionError, OverflowError):
            if base == 0.0:
                return math.inf
            return math.inf if abs(base) > 1 else 0.0
    if base < 0.0:
        return math.nan
    if base == 0.0:
        return math.inf if expo < 0 else 0.0
    try:
        return math.pow(base, expo)
    except (OverflowError, ValueError):
        return math.inf


def _safe_div(a: float, b: float) -> float:
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _eval(node, env: Mapping[str, float], memo: dict) -> float:
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(node, Const):
        out = float(node.value)
    elif isinstance(node, Coord):
        out = env[node.name]
    elif isinstance(node, Add):
        out = _eval(node.a, env, memo) + _eval(node.b, env, memo)
    elif isinstance(node, Sub):
        out = _eval(node.a, env, memo) - _eval(node.b, env, memo)
    elif isinstance(node, Mul):
        out = _eval(node.a, env, memo) * _eval(node.b, env, memo)
    elif isinstance(node, Div):
        out = _safe_div(_eval(node.a, env, memo), _eval(node.b, env, memo))
    elif isinstance(node, Neg):
        out = -_eval(node.a, env, memo)
    elif isinstance(node, Pow):
        out = _safe_pow(_eval(node.base, env, memo), float(node.exponent))
    elif isinstance(node, Call):
        out = _FN_EVAL[node.fn](_eval(node.arg, env, memo))
    else:  # pragma: no cover
        raise TypeError(f"unknown node {node!r}")
    memo[key] = out
    return out


# --------------------------------------------------------------------------
# exact differentiation (memoized per call so DAGs stay compact)
# --------------------------------------------------------------------------

def _diff(node, coord: str, memo: dict):
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(node, Const):
        out = _const(0)
    elif isinstance(node, Coord):
        out = _const(1 if node.name == coord else 0)
    elif isinstance(node, Add):
        out = _add(_diff(node.a, coord, memo), _diff(node.b, coord, memo))
    elif isinstance(node, Sub):
        out = _sub(_diff(node.a, coord, memo), _diff(node.b, coord, memo))
    elif isinstance(node, Mul):
        da, db = _diff(node.a, coord, memo), _diff(node.b, coord, memo)
        out = _add(_mul(da, node.b), _mul(node.a, db))
    elif isinstance(node, Div):
        da, db = _diff(node.a, coord, memo), _diff(node.b, coord, memo)
        out = _div(_sub(_mul(da, node.b), _mul(node.a, db)), _pow(node.b, Fraction(2)))
    elif isinstance(node, Neg):
        out = _neg(_diff(node.a, coord, memo))
    elif isinstance(node, Pow):
        q = node.exponent
        du = _diff(node.base, coord, memo)
        out = _mul(_mul(_const(q), _pow(node.base, q - 1)), du)
    elif isinstance(node, Call):
        du = _diff(node.arg, coord, memo)
        u = node.arg
        if node.fn == "sqrt":
            out = _div(du, _mul(_const(2), Call("sqrt", u)))
        elif node.fn == "sin":
            out = _mul(_call("cos", u), du)
        elif node.fn == "cos":
            out = _neg(_mul(_call("sin", u), du))
        elif node.fn == "exp":
            out = _mul(_call("exp", u), du)
        elif node.fn == "log":
            out = _div(du, u)
        elif node.fn == "abs":
            # distributional point at 0 excluded: sign(0)=0 by convention
            out = _mul(_call("sign", u), du)
        elif node.fn == "sign":
            out = _const(0)
        else:  # pragma: no cover
            raise TypeError(f"unknown function {node.fn}")
    else:  # pragma: no cover
        raise TypeError(f"unknown node {node!r}")
    memo[key] = out
    return out


# --------------------------------------------------------------------------
# substitution (coordinate renaming, rotations, compositions)
# --------------------------------------------------------------------------

def _substitute(node, table: Mapping[str, Node], memo: dict):
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(node, Const):
        out = node
    elif isinstance(node, Coord):
        out = table.get(node.name, node)
    elif isinstance(node, (Add, Sub, Mul, Div)):
        a = _substitute(node.a, table, memo)
        b = _substitute(node.b, table, memo)
        out = {Add: _add, Sub: _sub, Mul: _mul, Div: _div}[type(node)](a, b)
    elif isinstance(node, Neg):
        out = _neg(_substitute(node.a, table, memo))
    elif isinstance(node, Pow):
        out = _pow(_substitute(node.base, table, memo), node.exponent)
    elif isinstance(node, Call):
        out = _call(node.fn, _substitute(node.arg, table, memo))
    else:  # pragma: no cover
        raise TypeError(f"unknown node {node!r}")
    memo[key] = out
    return out


# --------------------------------------------------------------------------
# pretty printer (re-parseable source)
# --------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 10, 20, 25, 30, 40


def _const_source(value) -> tuple[str, int]:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            n = value.numerator
            return (str(n), _PREC_ATOM if n >= 0 else _PREC_NEG)
        s = f"{abs(value.numerator)}/{value.denominator}"
        if value < 0:
            return (f"-{s}", _PREC_NEG)
        return (s, _PREC_MUL)
    if value < 0 or (value == 0 and math.copysign(1.0, value) < 0):
        return (repr(value), _PREC_NEG)
    return (repr(value), _PREC_ATOM)


def _source(node, parent_prec: int = 0) -> str:
    if isinstance(node, Const):
        text, prec = _const_source(node.value)
    elif isinstance(node, Coord):
        text, prec = node.name, _PREC_ATOM
    elif isinstance(node, Add):
        text = f"{_source(node.a, _PREC_ADD)}+{_source(node.b, _PREC_ADD + 1)}"
        prec = _PREC_ADD
    elif isinstance(node, Sub):
        text = f"{_source(node.a, _PREC_ADD)}-{_source(node.b, _PREC_ADD + 1)}"
        prec = _PREC_ADD
    elif isinstance(node, Mul):
        text = f"{_source(node.a, _PREC_MUL)}*{_source(node.b, _PREC_MUL + 1)}"
        prec = _PREC_MUL
    elif isinstance(node, Div):
        text = f"{_source(node.a, _PREC_MUL)}/{_source(node.b, _PREC_MUL + 1)}"
        prec = _PREC_MUL
    elif isinstance(node, Neg):
        text = f"-{_source(node.a, _PREC_NEG)}"
        prec = _PREC_NEG
    elif isinstance(node, Pow):
        etext, eprec = _const_source(node.exponent)
        if eprec <= _PREC_POW:
            etext = f"({etext})"
        text = f"{_source(node.base, _PREC_POW + 1)}^{etext}"
        prec = _PREC_POW
    elif isinstance(node, Call):
        text = f"{node.fn}({_source(node.arg)})"
        prec = _PREC_ATOM
    else:  # pragma: no cover
        raise TypeError(f"unknown node {node!r}")
    if prec < parent_prec:
        return f"({text})"
    return text


# --------------------------------------------------------------------------
# parser: standard infix grammar, '^' is power, no implicit multiplication
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)


@dataclass
class _Token:
    kind: str  # 'num' | 'name' | 'op' | 'end'
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(src):
        if src[i].isspace():
            i += 1
            continue
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ParseError(f"unexpected character {src[i]!r}", i)
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(), i))
        i = m.end()
    tokens.append(_Token("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, coords: Sequence[str]):
        self.src = src
        self.coords = set(coords)
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        tok = self.take()
        if tok.kind != "op" or tok.text != op:
            raise ParseError(f"expected '{op}'", tok.pos)

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected token {tok.text!r}", tok.pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            rhs = self.term()
            node = _add(node, rhs) if op == "+" else _sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            rhs = self.unary()
            node = _mul(node, rhs) if op == "*" else _div(node, rhs)
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text in "+-":
            self.take()
            operand = self.unary()
            return operand if tok.text == "+" else _neg(operand)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.take()
            epos = self.peek().pos
            exponent = self.unary()  # right-associative
            if not isinstance(exponent, Const) or not isinstance(exponent.value, Fraction):
                raise ParseError("exponent must be a rational constant", epos)
            return _pow(base, exponent.value)
        return base

    def atom(self) -> Node:
        tok = self.take()
        if tok.kind == "num":
            return _const(Fraction(Decimal(tok.text)))
        if tok.kind == "name":
            if self.peek().kind == "op" and self.peek().text == "(":
                if tok.text not in _FN_EVAL:
                    raise UnknownIdentifier(tok.text, tok.pos)
                self.take()
                arg = self.expr()
                self.expect_op(")")
                return _call(tok.text, arg)
            if tok.text not in self.coords:
                raise UnknownIdentifier(tok.text, tok.pos)
            return Coord(tok.text)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {tok.text or 'end of input'!r}", tok.pos)


# --------------------------------------------------------------------------
# public wrapper
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldExpr:
    """Immutable scalar field over an ordered tuple of coordinate names."""

    root: Node
    coords: tuple[str, ...]

    # -- construction -----------------------------------------------------

    @staticmethod
    def parse(src: str, coords: Sequence[str]) -> "FieldExpr":
        return parse_field(src, coords)

    @staticmethod
    def constant(value: Number, coords: Sequence[str]) -> "FieldExpr":
        v = Fraction(value) if isinstance(value, int) else value
        return FieldExpr(_const(v) if isinstance(v, (int, Fraction)) else Const(float(v)),
                         tuple(coords))

    @staticmethod
    def coordinate(name: str, coords: Sequence[str]) -> "FieldExpr":
        coords = tuple(coords)
        if name not in coords:
            raise ValueError(f"{name!r} is not among coordinates {coords}")
        return FieldExpr(Coord(name), coords)

    # -- evaluation and calculus -------------------------------------------

    def __call__(self, point: Sequence[float]) -> float:
        if len(point) != len(self.coords):
            raise DimensionMismatch(
                f"point has {len(point)} components, expression has "
                f"{len(self.coords)} coordinates"
            )
        env = {name: float(v) for name, v in zip(self.coords, point)}
        return _eval(self.root, env, {})

    def diff(self, coord: str) -> "FieldExpr":
        if coord not in self.coords:
            raise ValueError(f"{coord!r} is not among coordinates {self.coords}")
        return FieldExpr(_diff(self.root, coord, {}), self.coords)

    def gradient(self) -> tuple["FieldExpr", ...]:
        return tuple(self.diff(c) for c in self.coords)

    def substitute(self, table: Mapping[str, "FieldExpr | Number"],
                   coords: Sequence[str] | None = None) -> "FieldExpr":
        """Replace coordinates by expressions (or numbers); others pass through."""
        new_coords = tuple(coords) if coords is not None else self.coords
        node_table = {}
        for name, repl in table.items():
            if isinstance(repl, FieldExpr):
                node_table[name] = repl.root
            else:
                node_table[name] = _const(Fraction(repl)) if isinstance(repl, int) \
                    else Const(float(repl))
        return FieldExpr(_substitute(self.root, node_table, {}), new_coords)

    def rename_coords(self, new_names: Sequence[str]) -> "FieldExpr":
        if len(new_names) != len(self.coords):
            raise DimensionMismatch("coordinate count changed in rename")
        table = {old: Coord(new) for old, new in zip(self.coords, new_names)}
        return FieldExpr(_substitute(self.root, table, {}), tuple(new_names))

    def source(self) -> str:
        """Reparseable textual form; the serialized representation."""
        return _source(self.root)

    def __repr__(self):
        return f"FieldExpr({self.source()!r}, coords={list(self.coords)})"

    # -- operator algebra (used when building symbolic fields) --------------

    def _coerce(self, other) -> Node:
        if isinstance(other, FieldExpr):
            if other.coords != self.coords:
                raise DimensionMismatch("mixed coordinate systems")
            return other.root
        if isinstance(other, (int, Fraction)):
            return _const(Fraction(other))
        return Const(float(other))

    def __add__(self, other):
        return FieldExpr(_add(self.root, self._coerce(other)), self.coords)

    def __radd__(self, other):
        return FieldExpr(_add(self._coerce(other), self.root), self.coords)

    def __sub__(self, other):
        return FieldExpr(_sub(self.root, self._coerce(other)), self.coords)

    def __rsub__(self, other):
        return FieldExpr(_sub(self._coerce(other), self.root), self.coords)

    def __mul__(self, other):
        return FieldExpr(_mul(self.root, self._coerce(other)), self.coords)

    def __rmul__(self, other):
        return FieldExpr(_mul(self._coerce(other), self.root), self.coords)

    def __truediv__(self, other):
        return FieldExpr(_div(self.root, self._coerce(other)), self.coords)

    def __rtruediv__(self, other):
        return FieldExpr(_div(self._coerce(other), self.root), self.coords)

    def __pow__(self, exponent):
        return FieldExpr(_pow(self.root, Fraction(exponent)), self.coords)

    def __neg__(self):
        return FieldExpr(_neg(self.root), self.coords)


def sqrt(e: FieldExpr) -> FieldExpr:
    return FieldExpr(_call("sqrt", e.root), e.coords)


def call(fn: str, e: FieldExpr) -> FieldExpr:
    if fn not in _FN_EVAL:
        raise ValueError(f"unknown function {fn!r}")
    return FieldExpr(_call(fn, e.root), e.coords)


def parse_field(src: str, coords: Sequence[str]) -> FieldExpr:
    """Parse infix source into a FieldExpr over the declared coordinates."""
    coords = tuple(coords)
    if not coords:
        raise ValueError("coordinate list must be nonempty")
    if len(set(coords)) != len(coords):
        raise ValueError("coordinate names must be distinct")
    root = _Parser(src, coords).parse()
    return FieldExpr(root, coords)


def differentiate(e: FieldExpr, coord: str) -> FieldExpr:
    return e.diff(coord)


def evaluate(e: FieldExpr, point: Sequence[float]) -> float:
    return e(point)
