"""Seeded generators of random expressions, used by property tests."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import ONE, Add, Const, Cos, Div, Exp, Expression, Mul, Neg, Pow, Sin, Var


def random_polynomial(
    rng: np.random.Generator,
    variables: Sequence[str],
    degree: int,
    n_terms: int = 3,
) -> Expression:
    """Sum of `n_terms` random monomials of total degree <= `degree`.

    Coefficients are drawn from [-1, 1] and rounded to 3 decimals.
    """
    terms = []
    variables = list(variables)
    for _ in range(n_terms):
        coeff = round(float(rng.uniform(-1.0, 1.0)), 3)
        d = int(rng.integers(0, degree + 1))
        factors: list[Expression] = [Const(coeff)]
        if variables:
            for name in rng.choice(variables, size=d, replace=True):
                factors.append(Var(str(name)))
        terms.append(Mul(tuple(factors)) if len(factors) > 1 else factors[0])
    return Add(tuple(terms))


_UNARY = ("neg", "sin", "cos", "exp", "pow")
_BINARY = ("add", "mul", "div", "sub")


def random_expression(
    rng: np.random.Generator,
    variables: Sequence[str],
    depth: int = 4,
    _exp_allowed: bool = True,
) -> Expression:
    """Random smooth expression tree of depth at most `depth`.

    Quotients always have denominators of the form ``1 + s^2`` and ``exp``
    is never nested inside another ``exp``, so every point of R^n is smooth
    and values stay moderate on the unit box.
    """
    variables = list(variables)
    if depth <= 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return Var(str(rng.choice(variables)))
        return Const(round(float(rng.uniform(-1.0, 1.0)), 3))

    kinds = list(_BINARY) + [u for u in _UNARY if u != "exp" or _exp_allowed]
    kind = kinds[int(rng.integers(len(kinds)))]
    sub = lambda allow=_exp_allowed: random_expression(rng, variables, depth - 1, allow)  # noqa: E731

    if kind == "neg":
        return Neg(sub())
    if kind == "sin":
        return Sin(sub())
    if kind == "cos":
        return Cos(sub())
    if kind == "exp":
        return Exp(sub(False))
    if kind == "pow":
        return Pow(sub(), int(rng.integers(2, 4)))
    if kind == "add":
        return Add((sub(), sub()))
    if kind == "sub":
        return Add((sub(), Neg(sub())))
    if kind == "mul":
        return Mul((sub(), sub()))
    # div: denominator 1 + s^2 uses two levels
    if depth >= 3:
        den = Add((ONE, Pow(random_expression(rng, variables, depth - 2, _exp_allowed), 2)))
    else:
        den = Add((ONE, Pow(Var(str(rng.choice(variables))), 2)))
    return Div(sub(), den)
