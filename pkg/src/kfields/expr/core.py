"""Expression tree nodes, printing and evaluation.

Nodes are immutable. Arithmetic operators on nodes build new trees without
any simplification; use :func:`kfields.expr.simplify` for that.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from ..errors import DivisionByZero, UnboundVariable

Number = Union[int, float]

# printing precedence
_ADD, _NEG, _MUL, _POW, _ATOM = 1, 2, 3, 4, 5


def _format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


class Expression:
    __slots__ = ()
    precedence = _ATOM

    def children(self) -> tuple["Expression", ...]:
        return ()

    def free_variables(self) -> frozenset[str]:
        out: set[str] = set()
        stack = [self]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                out.add(node.name)
            stack.extend(node.children())
        return frozenset(out)

    def _wrap(self, other: int) -> str:
        s = str(self)
        return f"({s})" if self.precedence <= other else s

    # operator sugar
    def __add__(self, other):
        return Add((self, as_expression(other)))

    def __radd__(self, other):
        return Add((as_expression(other), self))

    def __sub__(self, other):
        return Add((self, Neg(as_expression(other))))

    def __rsub__(self, other):
        return Add((as_expression(other), Neg(self)))

    def __mul__(self, other):
        return Mul((self, as_expression(other)))

    def __rmul__(self, other):
        return Mul((as_expression(other), self))

    def __truediv__(self, other):
        return Div(self, as_expression(other))

    def __rtruediv__(self, other):
        return Div(as_expression(other), self)

    def __pow__(self, exponent):
        if isinstance(exponent, Const):
            exponent = exponent.value
        if int(exponent) != exponent:
            raise TypeError("only integer powers are supported")
        return Pow(self, int(exponent))

    def __neg__(self):
        return Neg(self)

    def __pos__(self):
        return self


@dataclass(frozen=True)
class Const(Expression):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    @property
    def precedence(self):
        return _NEG if self.value < 0 else _ATOM

    def __str__(self):
        return _format_number(self.value)


@dataclass(frozen=True)
class Var(Expression):
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("variable name must be a nonempty string")

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expression):
    arg: Expression
    precedence = _NEG

    def children(self):
        return (self.arg,)

    def __str__(self):
        a = self.arg
        if isinstance(a, (Var, Pow, Func)) or (isinstance(a, Const) and a.value >= 0):
            return f"-{a}"
        return f"-({a})"


@dataclass(frozen=True)
class Add(Expression):
    terms: tuple[Expression, ...]
    precedence = _ADD

    def children(self):
        return self.terms

    def __str__(self):
        parts = []
        for i, t in enumerate(self.terms):
            if i and isinstance(t, Neg):
                parts.append(" - " + t.arg._wrap(_ADD))
            elif i and isinstance(t, Const) and t.value < 0:
                parts.append(" - " + _format_number(-t.value))
            elif (i and isinstance(t, Mul) and t.factors and isinstance(t.factors[0], Const)
                  and t.factors[0].value < 0):
                rest = Mul((Const(-t.factors[0].value),) + t.factors[1:])
                parts.append(" - " + str(rest))
            elif i:
                parts.append(" + " + str(t))
            else:
                parts.append(str(t))
        return "".join(parts) if parts else "0"


@dataclass(frozen=True)
class Mul(Expression):
    factors: tuple[Expression, ...]
    precedence = _MUL

    def children(self):
        return self.factors

    def __str__(self):
        if not self.factors:
            return "1"
        first, *rest = self.factors
        out = first._wrap(_NEG) if isinstance(first, Neg) else first._wrap(_ADD)
        for f in rest:
            out += "*" + f._wrap(_NEG)
        return out


@dataclass(frozen=True)
class Div(Expression):
    num: Expression
    den: Expression
    precedence = _MUL

    def children(self):
        return (self.num, self.den)

    def __str__(self):
        num = self.num._wrap(_NEG) if isinstance(self.num, Neg) else self.num._wrap(_ADD)
        return f"{num}/{self.den._wrap(_MUL)}"


@dataclass(frozen=True)
class Pow(Expression):
    base: Expression
    exponent: int
    precedence = _POW

    def __post_init__(self):
        if int(self.exponent) != self.exponent:
            raise TypeError("only integer powers are supported")
        object.__setattr__(self, "exponent", int(self.exponent))

    def children(self):
        return (self.base,)

    def __str__(self):
        e = str(self.exponent) if self.exponent >= 0 else f"({self.exponent})"
        return f"{self.base._wrap(_POW)}^{e}"


@dataclass(frozen=True)
class Func(Expression):
    arg: Expression
    name = "?"

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"{self.name}({self.arg})"


class Sin(Func):
    name = "sin"


class Cos(Func):
    name = "cos"


class Exp(Func):
    name = "exp"


FUNCTIONS = {"sin": Sin, "cos": Cos, "exp": Exp}
_NUMPY_FUNCS = {Sin: np.sin, Cos: np.cos, Exp: np.exp}


def as_expression(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float, np.integer, np.floating)):
        return Const(float(value))
    if isinstance(value, str):
        from .parse import parse

        return parse(value)
    raise TypeError(f"cannot convert {type(value).__name__} to Expression")


def const(value: Number) -> Const:
    return Const(value)


def var(name: str) -> Var:
    return Var(name)


def sin(e) -> Sin:
    return Sin(as_expression(e))


def cos(e) -> Cos:
    return Cos(as_expression(e))


def exp(e) -> Exp:
    return Exp(as_expression(e))


ZERO = Const(0.0)
ONE = Const(1.0)


def is_zero(e: Expression) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def free_variables(e: Expression) -> frozenset[str]:
    return e.free_variables()


def evaluate(e: Expression, binding: Mapping[str, object]):
    """Evaluate `e` with the variables in `binding`.

    Bound values may be floats or numpy arrays (broadcast together), so a
    whole batch of points can be evaluated in one pass.
    """
    return _eval(e, binding)


def _eval(e, b):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return b[e.name]
        except KeyError:
            raise UnboundVariable(e.name) from None
    if isinstance(e, Neg):
        return -_eval(e.arg, b)
    if isinstance(e, Add):
        total = 0.0
        for t in e.terms:
            total = total + _eval(t, b)
        return total
    if isinstance(e, Mul):
        prod = 1.0
        for f in e.factors:
            prod = prod * _eval(f, b)
        return prod
    if isinstance(e, Div):
        num, den = _eval(e.num, b), _eval(e.den, b)
        if np.any(np.asarray(den) == 0):
            raise DivisionByZero(f"denominator {e.den} vanishes")
        return num / den
    if isinstance(e, Pow):
        base = _eval(e.base, b)
        if e.exponent < 0:
            if np.any(np.asarray(base) == 0):
                raise DivisionByZero(f"zero base {e.base} raised to {e.exponent}")
            return 1.0 / base ** (-e.exponent)
        return base ** e.exponent
    if isinstance(e, Func):
        arg = _eval(e.arg, b)
        fn = _NUMPY_FUNCS[type(e)]
        if np.ndim(arg) == 0:
            return float(fn(arg))
        return fn(arg)
    raise TypeError(f"unknown node {type(e).__name__}")


def substitute(e: Expression, mapping: Mapping[str, object]) -> Expression:
    """Replace variables by expressions (or numbers)."""
    repl = {k: as_expression(v) for k, v in mapping.items()}

    def walk(node):
        if isinstance(node, Var):
            return repl.get(node.name, node)
        if isinstance(node, Const):
            return node
        if isinstance(node, Neg):
            return Neg(walk(node.arg))
        if isinstance(node, Add):
            return Add(tuple(walk(t) for t in node.terms))
        if isinstance(node, Mul):
            return Mul(tuple(walk(f) for f in node.factors))
        if isinstance(node, Div):
            return Div(walk(node.num), walk(node.den))
        if isinstance(node, Pow):
            return Pow(walk(node.base), node.exponent)
        if isinstance(node, Func):
            return type(node)(walk(node.arg))
        raise TypeError(f"unknown node {type(node).__name__}")

    return walk(e)


PI = Const(math.pi)
