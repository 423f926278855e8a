"""Scalar expression engine: trees, parsing, evaluation, exact derivatives."""
from .calculus import differentiate, finite_difference, simplify
from .core import (
    ONE,
    PI,
    ZERO,
    Add,
    Const,
    Cos,
    Div,
    Exp,
    Expression,
    Mul,
    Neg,
    Pow,
    Sin,
    Var,
    as_expression,
    const,
    cos,
    evaluate,
    exp,
    free_variables,
    is_zero,
    sin,
    substitute,
    var,
)
from .parse import parse
from .sampling import random_expression, random_polynomial

__all__ = [
    "Add", "Const", "Cos", "Div", "Exp", "Expression", "Mul", "Neg", "ONE", "PI",
    "Pow", "Sin", "Var", "ZERO", "as_expression", "const", "cos", "differentiate",
    "evaluate", "exp", "finite_difference", "free_variables", "is_zero", "parse",
    "random_expression", "random_polynomial", "simplify", "sin", "substitute", "var",
]
