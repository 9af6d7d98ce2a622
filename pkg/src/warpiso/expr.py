"""Density expressions in the radial variable ``r``.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative, binds tighter than '-'
    atom   := NUMBER | 'r' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := 'exp' | 'log'

So ``-r^2`` is ``-(r^2)``, ``2*r^2`` is ``2*(r^2)`` and ``r^-4`` is ``r^(-4)``.

Trees are immutable frozen dataclasses; structural equality is tree equality.
Evaluation works on floats and numpy arrays alike.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class EvaluationError(ExprError, ArithmeticError):
    """Raised when an expression cannot be evaluated at the requested point."""


class DomainError(EvaluationError):
    pass


class DensityOverflowError(EvaluationError, OverflowError):
    pass


class SingularityError(EvaluationError, ZeroDivisionError):
    pass


# ---------------------------------------------------------------------------
# Tree nodes


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str  # exp | log
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]

R = Var()
FUNCTIONS = ("exp", "log")
_BINARY_OPS = "+-*/^"


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    stripped_end = len(text.rstrip())
    while pos < stripped_end:
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", 0, self.text)
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos, self.text)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if val == "r":
                return R
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise UnknownIdentifierError(f"unknown identifier {val!r}", pos, self.text)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", pos, self.text)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree."""
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    return _Parser(text).parse()


def as_expr(value) -> Expr:
    """Coerce a string, number or tree into an expression tree."""
    if isinstance(value, (Num, Var, Neg, BinOp, Call)):
        return value
    if isinstance(value, str):
        return parse(value)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        v = float(value)
        return Num(v) if v >= 0 else Neg(Num(-v))
    raise TypeError(f"cannot interpret {value!r} as an expression")


# ---------------------------------------------------------------------------
# Printing


def to_text(e: Expr) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(e, Num):
        if e.value < 0 or math.copysign(1.0, e.value) < 0:
            return f"(-{_num_text(-e.value)})"
        return _num_text(e.value)
    if isinstance(e, Var):
        return "r"
    if isinstance(e, Neg):
        return f"(-{to_text(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Call):
        return f"{e.fn}({to_text(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def _num_text(v: float) -> str:
    if not math.isfinite(v):
        raise ExprError(f"non-finite literal {v!r} cannot be printed")
    return repr(float(v))


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(e: Expr, r):
    """Evaluate ``e`` at ``r`` (float or array).

    Raises DomainError (log of a non-positive number, fractional power of a
    negative base), SingularityError (division by zero, zero to a negative
    power) or DensityOverflowError (a finite input produced an infinity).
    """
    scalar = np.ndim(r) == 0
    x = np.asarray(r, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(e, x)
    out = np.broadcast_to(out, x.shape)
    if scalar:
        return float(out)
    return np.array(out, dtype=float)


def _eval(e: Expr, x: np.ndarray):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        return x
    if isinstance(e, Neg):
        return -_eval(e.arg, x)
    if isinstance(e, Call):
        a = _eval(e.arg, x)
        if e.fn == "exp":
            out = np.exp(a)
            if np.any(np.isinf(out) & np.isfinite(a)):
                raise DensityOverflowError("overflow in exp")
            return out
        if np.any(a <= 0):
            raise DomainError("log of a non-positive number")
        return np.log(a)
    if isinstance(e, BinOp):
        a = _eval(e.left, x)
        b = _eval(e.right, x)
        op = e.op
        if op == "+":
            out = a + b
        elif op == "-":
            out = a - b
        elif op == "*":
            out = a * b
        elif op == "/":
            if np.any(b == 0):
                raise SingularityError("division by zero")
            out = a / b
        else:
            out = _power(a, b)
        if np.any(np.isinf(out) & np.isfinite(a) & np.isfinite(b)):
            raise DensityOverflowError(f"overflow in {op!r}")
        return out
    raise TypeError(f"not an expression node: {e!r}")


def _power(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    integral = b == np.round(b)
    if np.any((a < 0) & ~integral):
        raise DomainError("fractional power of a negative base")
    if np.any((a == 0) & (b < 0)):
        raise SingularityError("zero raised to a negative power")
    return np.power(a, b)


# ---------------------------------------------------------------------------
# Construction with constant folding


def _is_num(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Num) and (value is None or e.value == value)


def is_constant(e: Expr) -> bool:
    """True when ``e`` does not depend on ``r``."""
    if isinstance(e, Num):
        return True
    if isinstance(e, Var):
        return False
    if isinstance(e, (Neg, Call)):
        return is_constant(e.arg)
    return is_constant(e.left) and is_constant(e.right)


def _fold(e: Expr) -> Expr:
    try:
        v = evaluate(e, 1.0)
    except EvaluationError:
        return e
    if not math.isfinite(v):
        return e
    return Num(v)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value) if a.value != 0 else Num(0.0)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0):
        return b
    if _is_num(b, 0):
        return a
    if _is_num(a) and _is_num(b):
        return _fold(BinOp("+", a, b))
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 0):
        return a
    if _is_num(a, 0):
        return neg(b)
    if a == b:
        return Num(0.0)
    if _is_num(a) and _is_num(b):
        return _fold(BinOp("-", a, b))
    return BinOp("-", a, b)


def _base_exponent(e: Expr):
    """(base, constant exponent) when e is a power with a numeric exponent."""
    if isinstance(e, BinOp) and e.op == "^" and is_constant(e.right):
        k = _fold(e.right)
        if isinstance(k, Num):
            return e.left, k.value
    if not isinstance(e, Num):
        return e, 1.0
    return None, None


def mul(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0) or _is_num(b, 0):
        return Num(0.0)
    ba, ea = _base_exponent(a)
    bb, eb = _base_exponent(b)
    if ba is not None and ba == bb and isinstance(ba, Var):
        return power(ba, Num(ea + eb))
    if _is_num(a, 1):
        return b
    if _is_num(b, 1):
        return a
    if _is_num(a) and _is_num(b):
        return _fold(BinOp("*", a, b))
    if _is_num(b) and not _is_num(a):
        a, b = b, a
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 1):
        return a
    if _is_num(a, 0) and not _is_num(b, 0):
        return Num(0.0)
    if a == b:
        return Num(1.0)
    if _is_num(a) and _is_num(b) and b.value != 0:
        return _fold(BinOp("/", a, b))
    return BinOp("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 0):
        return Num(1.0)
    if _is_num(b, 1):
        return a
    if _is_num(a, 1):
        return Num(1.0)
    if _is_num(a) and _is_num(b):
        return _fold(BinOp("^", a, b))
    return BinOp("^", a, b)


def exp(a: Expr) -> Expr:
    if isinstance(a, Call) and a.fn == "log":
        return a.arg
    return _fold(Call("exp", a)) if _is_num(a) else Call("exp", a)


def log(a: Expr) -> Expr:
    if isinstance(a, Call) and a.fn == "exp":
        return a.arg
    return _fold(Call("log", a)) if _is_num(a) else Call("log", a)


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` bottom-up through the folding constructors."""
    if isinstance(e, (Num, Var)):
        return e
    if isinstance(e, Neg):
        return neg(simplify(e.arg))
    if isinstance(e, Call):
        return (exp if e.fn == "exp" else log)(simplify(e.arg))
    builder = {"+": add, "-": sub, "*": mul, "/": div, "^": power}[e.op]
    return builder(simplify(e.left), simplify(e.right))


# ---------------------------------------------------------------------------
# Differentiation


def differentiate(e: Expr) -> Expr:
    """Symbolic d/dr with constant folding (no further simplification)."""
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0)
    if isinstance(e, Neg):
        return neg(differentiate(e.arg))
    if isinstance(e, Call):
        da = differentiate(e.arg)
        if e.fn == "exp":
            return mul(simplify(e), da)
        return div(da, simplify(e.arg))
    u, v = simplify(e.left), simplify(e.right)
    du, dv = differentiate(e.left), differentiate(e.right)
    if e.op == "+":
        return add(du, dv)
    if e.op == "-":
        return sub(du, dv)
    if e.op == "*":
        return add(mul(du, v), mul(u, dv))
    if e.op == "/":
        return div(sub(mul(du, v), mul(u, dv)), power(v, Num(2.0)))
    # u ^ v
    if is_constant(e.right):
        return mul(mul(v, power(u, sub(v, Num(1.0)))), du)
    if is_constant(e.left):
        return mul(mul(power(u, v), log(u)), dv)
    return mul(power(u, v), add(mul(dv, log(u)), div(mul(v, du), u)))


def substitute(e: Expr, replacement: Expr) -> Expr:
    """Replace every occurrence of ``r`` in ``e`` with ``replacement``."""
    if isinstance(e, Num):
        return e
    if isinstance(e, Var):
        return replacement
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, replacement))
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.arg, replacement))
    return BinOp(e.op, substitute(e.left, replacement), substitute(e.right, replacement))


@dataclass(frozen=True)
class DerivedExpr:
    """An expression with its first two symbolic derivatives."""

    value: Expr
    first: Expr
    second: Expr

    @classmethod
    def of(cls, e: Expr) -> "DerivedExpr":
        d1 = differentiate(e)
        return cls(e, d1, differentiate(d1))
