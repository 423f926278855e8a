"""Symbolic differentiation, simplification and the finite-difference oracle."""
from __future__ import annotations

import math
from typing import Mapping

from .core import (
    ONE,
    ZERO,
    Add,
    Const,
    Cos,
    Div,
    Exp,
    Expression,
    Func,
    Mul,
    Neg,
    Pow,
    Sin,
    Var,
    evaluate,
    is_zero,
)


def differentiate(e: Expression, var: str) -> Expression:
    """Exact partial derivative of `e` with respect to the variable `var`.

    The result is passed through :func:`simplify`, so a derivative with
    respect to an absent variable is the zero constant.
    """
    return simplify(_d(e, var))


def _d(e, v):
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if v not in e.free_variables():
        return ZERO
    if isinstance(e, Neg):
        return Neg(_d(e.arg, v))
    if isinstance(e, Add):
        return Add(tuple(_d(t, v) for t in e.terms))
    if isinstance(e, Mul):
        terms = []
        for i, f in enumerate(e.factors):
            df = _d(f, v)
            if is_zero(df):
                continue
            terms.append(Mul(e.factors[:i] + (df,) + e.factors[i + 1:]))
        return Add(tuple(terms)) if terms else ZERO
    if isinstance(e, Div):
        dn = _d(e.num, v)
        if v not in e.den.free_variables():
            return Div(dn, e.den)
        dd = _d(e.den, v)
        return Div(Add((Mul((dn, e.den)), Neg(Mul((e.num, dd))))), Pow(e.den, 2))
    if isinstance(e, Pow):
        n = e.exponent
        if n == 0:
            return ZERO
        return Mul((Const(n), Pow(e.base, n - 1), _d(e.base, v)))
    if isinstance(e, Sin):
        return Mul((Cos(e.arg), _d(e.arg, v)))
    if isinstance(e, Cos):
        return Neg(Mul((Sin(e.arg), _d(e.arg, v))))
    if isinstance(e, Exp):
        return Mul((e, _d(e.arg, v)))
    raise TypeError(f"unknown node {type(e).__name__}")


def finite_difference(e: Expression, binding: Mapping[str, object], var: str, step: float):
    """Central difference (e(b + step*var) - e(b - step*var)) / (2*step)."""
    if not step > 0:
        raise ValueError("step must be positive")
    if var not in binding:
        # derivative along a coordinate the binding does not mention
        evaluate(e, binding)
        return 0.0
    plus = dict(binding)
    minus = dict(binding)
    plus[var] = binding[var] + step
    minus[var] = binding[var] - step
    return (evaluate(e, plus) - evaluate(e, minus)) / (2.0 * step)


# -- simplification ---------------------------------------------------------

def _split(e):
    """Return (coefficient, factors) of a product-like node."""
    if isinstance(e, Const):
        return e.value, ()
    if isinstance(e, Neg):
        c, f = _split(e.arg)
        return -c, f
    if isinstance(e, Mul):
        coeff, factors = 1.0, []
        for f in e.factors:
            c, fs = _split(f)
            coeff *= c
            factors.extend(fs)
        return coeff, tuple(factors)
    return 1.0, (e,)


def _collect_powers(factors):
    powers: dict = {}
    for f in factors:
        base, n = (f.base, f.exponent) if isinstance(f, Pow) else (f, 1)
        powers[base] = powers.get(base, 0) + n
    return tuple(b if n == 1 else Pow(b, n) for b, n in powers.items() if n != 0)


def _build(coeff, factors):
    if coeff == 0:
        return ZERO
    factors = _collect_powers(factors)
    if not factors:
        return Const(coeff)
    body = factors[0] if len(factors) == 1 else Mul(tuple(factors))
    if coeff == 1:
        return body
    if coeff == -1:
        return Neg(body)
    return Mul((Const(coeff),) + tuple(factors))


def _is_int(x):
    return x == int(x) and abs(x) < 2**53


def simplify(e: Expression) -> Expression:
    """Constant folding and identity/annihilation rules, bottom-up.

    Best effort only: no canonical form, no collection of like terms.
    """
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Neg):
        a = simplify(e.arg)
        if isinstance(a, Neg):
            return a.arg
        if isinstance(a, (Const, Mul)):
            c, f = _split(a)
            return _build(-c, f)
        return Neg(a)
    if isinstance(e, Add):
        terms, total = [], 0.0
        for t in e.terms:
            s = simplify(t)
            if isinstance(s, Neg) and isinstance(s.arg, Add):
                flat = [simplify(Neg(u)) for u in s.arg.terms]
            elif isinstance(s, Add):
                flat = list(s.terms)
            else:
                flat = [s]
            for u in flat:
                if isinstance(u, Const):
                    total += u.value
                else:
                    terms.append(u)
        if total != 0:
            terms.append(Const(total))
        if not terms:
            return ZERO
        return terms[0] if len(terms) == 1 else Add(tuple(terms))
    if isinstance(e, Mul):
        parts = [simplify(f) for f in e.factors]
        divs = [p for p in parts if isinstance(p, Div)]
        if divs:
            nums = [p.num if isinstance(p, Div) else p for p in parts]
            return simplify(Div(Mul(tuple(nums)), Mul(tuple(d.den for d in divs))))
        c, f = _split(Mul(tuple(parts)))
        return _build(c, f)
    if isinstance(e, Div):
        num, den = simplify(e.num), simplify(e.den)
        if isinstance(num, Div):
            return simplify(Div(num.num, Mul((num.den, den))))
        if isinstance(den, Div):
            return simplify(Div(Mul((num, den.den)), den.num))
        cn, fn = _split(num)
        cd, fd = _split(den)
        if cd == 0 and not fd:
            return Div(num, den)  # left for evaluate() to report
        if cn == 0:
            return ZERO
        if _is_int(cn) and _is_int(cd):
            g = math.gcd(int(cn), int(cd))
            cn, cd = cn / g, cd / g
            if cd < 0:
                cn, cd = -cn, -cd
        else:
            cn, cd = cn / cd, 1.0
        denominator = _build(cd, fd)
        if isinstance(denominator, Const) and denominator.value == 1:
            return _build(cn, fn)
        if cn < 0:
            return Neg(Div(_build(-cn, fn), denominator))
        return Div(_build(cn, fn), denominator)
    if isinstance(e, Pow):
        base = simplify(e.base)
        n = e.exponent
        if n == 0:
            return ONE
        if n == 1:
            return base
        if isinstance(base, Const):
            if base.value == 0 and n < 0:
                return Pow(base, n)
            return Const(base.value ** n)
        if isinstance(base, Pow):
            return simplify(Pow(base.base, base.exponent * n))
        return Pow(base, n)
    if isinstance(e, Func):
        a = simplify(e.arg)
        if isinstance(a, Const):
            return Const(evaluate(type(e)(a), {}))
        return type(e)(a)
    raise TypeError(f"unknown node {type(e).__name__}")
