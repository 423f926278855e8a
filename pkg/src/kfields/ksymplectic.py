"""Polarised exact k-symplectic Hamiltonian systems in Darboux coordinates."""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import ChartMismatch, GaugeConstraintViolated, SchemaError
from .expr import ZERO, Const, Expression, as_expression, differentiate, evaluate, simplify
from .expr.core import Add, Div, Neg, is_zero
from .expr.sampling import random_polynomial
from .geometry import DarbouxChart, KVectorField, SectionGrid, interior, prolong, random_points
from .linalg import RANK_RTOL, singular_values

GAUGE_TOL = 1e-10
GAUGE_PROBES = 16
SKEW_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class KSymplecticSystem:
    """(P, omega, h) with omega = dq^i ^ dp_i^alpha (x) e_alpha.

    `params` are named constants (e.g. rho, tau) that `h` may reference.
    """

    chart: DarbouxChart
    h: Expression
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.chart.has_z:
            raise SchemaError("a k-symplectic system needs a chart without z coordinates")
        object.__setattr__(self, "h", as_expression(self.h))
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        _check_names(self.h, self.chart, self.params)

    def bind(self, point: Mapping) -> dict:
        return {**self.params, **point}


def _check_names(h, chart, params):
    clash = set(params) & set(chart.coordinates)
    if clash:
        raise SchemaError(f"parameters shadow coordinates: {sorted(clash)}")
    extra = h.free_variables() - set(chart.coordinates) - set(params)
    if extra:
        raise SchemaError(f"Hamiltonian uses unknown names {sorted(extra)}")


@dataclass(frozen=True, eq=False)
class GaugeSpec:
    """Free components of a Hamiltonian k-vector field.

    `components` maps (alpha, coordinate name) to the expression for
    (X_alpha)^coordinate; alpha is 0-based. Only momentum (and, for contact
    systems, z) coordinates may be set; unset entries are zero. With
    ``canonical=True`` the components are ignored and the diagonal split is
    used instead.
    """

    components: Mapping[tuple[int, str], Expression] = field(default_factory=dict)
    canonical: bool = False

    def __post_init__(self):
        comps = {(int(a), str(n)): as_expression(e) for (a, n), e in dict(self.components).items()}
        object.__setattr__(self, "components", MappingProxyType(comps))

    @classmethod
    def canonical_gauge(cls) -> "GaugeSpec":
        return cls(canonical=True)

    def get(self, alpha: int, name: str) -> Expression:
        return self.components.get((alpha, name), ZERO)

    def describe(self) -> dict:
        if self.canonical:
            return {"canonical": True}
        return {"canonical": False,
                "components": {f"X{a + 1}[{n}]": str(e) for (a, n), e in sorted(self.components.items())}}


CANONICAL = GaugeSpec(canonical=True)


@dataclass(frozen=True, eq=False)
class TwoFormBundle:
    """Coefficient matrices of omega^1..omega^k at a point, shape (k, dim, dim)."""

    forms: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.forms, dtype=float)
        if f.ndim != 3 or f.shape[1] != f.shape[2]:
            raise ValueError("forms must have shape (k, dim, dim)")
        if np.max(np.abs(f + np.swapaxes(f, 1, 2)), initial=0.0) > SKEW_TOL:
            raise ValueError("two-form matrices must be skew-symmetric")
        object.__setattr__(self, "forms", f)

    @property
    def k(self) -> int:
        return self.forms.shape[0]

    @property
    def dim(self) -> int:
        return self.forms.shape[1]

    def contract(self, vectors: np.ndarray) -> np.ndarray:
        """sum_alpha iota_{X_alpha} omega^alpha, with (iota_X w)_c = sum_d w_dc X^d.

        `vectors` has shape (k, dim, *batch); the result has shape (dim, *batch).
        """
        return np.einsum("adc,ad...->c...", self.forms, vectors)


def darboux_two_forms(chart: DarbouxChart) -> TwoFormBundle:
    """omega^alpha = dq^i ^ dp_i^alpha: +1 at (q^i, p_i^alpha), -1 transposed."""
    if chart.has_z:
        raise ChartMismatch("k-symplectic forms need a chart without z coordinates")
    forms = np.zeros((chart.k, chart.dim, chart.dim))
    for alpha in range(chart.k):
        for i in range(chart.n):
            a, b = chart.index(chart.q(i)), chart.index(chart.p(i, alpha))
            forms[alpha, a, b] = 1.0
            forms[alpha, b, a] = -1.0
    return TwoFormBundle(forms)


@dataclass(frozen=True)
class NondegeneracyReport:
    nondegenerate: bool
    rank: int
    dim: int
    singular_values: tuple[float, ...]


def nondegeneracy_check(forms: TwoFormBundle, rtol: float = RANK_RTOL) -> NondegeneracyReport:
    """omega is nondegenerate iff the stacked (k*dim, dim) matrix has full column rank."""
    stacked = forms.forms.reshape(forms.k * forms.dim, forms.dim)
    s = singular_values(stacked)
    rank = 0 if s.size == 0 or s[0] == 0 else int(np.sum(s > rtol * s[0]))
    return NondegeneracyReport(rank == forms.dim, rank, forms.dim, tuple(float(x) for x in s))


def _probe(chart, params, count=GAUGE_PROBES, seed=0):
    pts = random_points(chart, count, np.random.default_rng(seed))
    return {**params, **pts}


def _max_abs_on_probes(expr: Expression, chart, params) -> float:
    expr = simplify(expr)
    if isinstance(expr, Const):
        return abs(expr.value)
    vals = evaluate(expr, _probe(chart, params))
    return float(np.max(np.abs(vals)))


def _validate_gauge_keys(gauge: GaugeSpec, chart: DarbouxChart, params, allowed: set[str]):
    names = set(chart.coordinates) | set(params)
    for (alpha, name), expr in gauge.components.items():
        if not 0 <= alpha < chart.k:
            raise SchemaError(f"gauge index alpha = {alpha + 1} out of range 1..{chart.k}")
        if name not in allowed:
            raise SchemaError(f"gauge may not set component {name!r}; it is fixed by h")
        extra = expr.free_variables() - names
        if extra:
            raise SchemaError(f"gauge entry X{alpha + 1}[{name}] uses unknown names {sorted(extra)}")


def momentum_trace_target(sys: KSymplecticSystem, i: int) -> Expression:
    """Required value of sum_alpha (X_alpha)^{p_i^alpha}: -dh/dq^i."""
    return simplify(Neg(differentiate(sys.h, sys.chart.q(i))))


def hamiltonian_kvf(sys: KSymplecticSystem, gauge: GaugeSpec = CANONICAL, *,
                    strict: bool = False, check: bool = True) -> KVectorField:
    """Assemble X_alpha = dh/dp_i^alpha d/dq^i + g_{alpha beta i} d/dp_i^beta.

    The gauge must satisfy sum_alpha g_{alpha alpha i} = -dh/dq^i (checked
    symbolically, then at seeded probe points). ``strict=True`` instead
    requires every diagonal entry to equal -dh/dq^i; for k > 1 such fields
    do not solve the summed equation unless dh/dq = 0.
    """
    chart, k = sys.chart, sys.chart.k
    _validate_gauge_keys(gauge, chart, sys.params, set(chart.momenta))
    rows = [[ZERO] * chart.dim for _ in range(k)]
    for alpha in range(k):
        for i in range(chart.n):
            rows[alpha][chart.index(chart.q(i))] = differentiate(sys.h, chart.p(i, alpha))
    for i in range(chart.n):
        target = momentum_trace_target(sys, i)
        for alpha in range(k):
            for beta in range(k):
                name = chart.p(i, beta)
                if gauge.canonical:
                    if alpha != beta:
                        entry = ZERO
                    elif strict:
                        entry = target
                    else:
                        entry = simplify(Div(target, Const(k))) if k > 1 else target
                else:
                    entry = gauge.get(alpha, name)
                rows[alpha][chart.index(name)] = entry
        if check:
            diag = [rows[a][chart.index(chart.p(i, a))] for a in range(k)]
            if strict:
                bad = max(_max_abs_on_probes(Add((d, Neg(target))), chart, sys.params) for d in diag)
            else:
                bad = _max_abs_on_probes(Add(tuple(diag) + (Neg(target),)), chart, sys.params)
            if bad > GAUGE_TOL:
                raise GaugeConstraintViolated(
                    f"momentum trace for q{i + 1} misses -dh/d{chart.q(i)} by {bad:.3g}")
    return KVectorField(chart, tuple(tuple(r) for r in rows), sys.params)


@dataclass(frozen=True, eq=False)
class CovectorResidual:
    covector: np.ndarray  # shape (dim, *batch)
    max_norm: float

    def per_point(self) -> np.ndarray:
        c = np.abs(self.covector).reshape(self.covector.shape[0], -1)
        return c.max(axis=0)


def dh_covector(h: Expression, chart: DarbouxChart, binding: Mapping, shape) -> np.ndarray:
    return np.array([np.broadcast_to(evaluate(differentiate(h, c), binding), shape)
                     for c in chart.coordinates])


def hdw_residual(sys: KSymplecticSystem, X: KVectorField, pt: Mapping) -> CovectorResidual:
    """sum_alpha iota_{X_alpha} omega^alpha - dh at `pt` (scalars or a batch of arrays)."""
    if X.chart != sys.chart:
        raise ChartMismatch("k-vector field and system use different charts")
    binding = sys.bind({**X.params, **pt})
    shape = np.broadcast_shapes(*(np.shape(v) for v in pt.values())) if pt else ()
    lhs = darboux_two_forms(sys.chart).contract(X.evaluate({**pt}))
    r = lhs - dh_covector(sys.h, sys.chart, binding, shape)
    return CovectorResidual(r, float(np.max(np.abs(r), initial=0.0)))


@dataclass(frozen=True, eq=False)
class FieldEquationResidual:
    max_norm: float
    residuals: Mapping[tuple, np.ndarray]  # ("velocity", i, alpha) and ("divergence", i)


def hdw_field_equations_residual(sys: KSymplecticSystem, s: SectionGrid) -> FieldEquationResidual:
    """Residuals of the HDW field equations along a sampled section.

    d psi^i / dx^alpha = dh/dp_i^alpha o psi and
    sum_alpha d psi_i^alpha / dx^alpha = -dh/dq^i o psi, max over interior nodes.
    """
    chart = sys.chart
    if s.k != chart.k:
        raise ChartMismatch(f"system has k = {chart.k}, section has k = {s.k}")
    missing = set(chart.coordinates) - set(s.names)
    if missing:
        raise ChartMismatch(f"section lacks coordinates {sorted(missing)}")
    pro = prolong(s)
    binding = sys.bind({n: s.values[n] for n in chart.coordinates})
    out = {}
    for i in range(chart.n):
        qi = chart.q(i)
        for alpha in range(chart.k):
            rhs = np.broadcast_to(evaluate(differentiate(sys.h, chart.p(i, alpha)), binding), s.shape)
            out[("velocity", i, alpha)] = pro.tangents[alpha][qi] - rhs
        div = sum(pro.tangents[a][chart.p(i, a)] for a in range(chart.k))
        out[("divergence", i)] = div + np.broadcast_to(evaluate(differentiate(sys.h, qi), binding), s.shape)
    worst = max((float(np.max(np.abs(interior(r)), initial=0.0)) for r in out.values()), default=0.0)
    return FieldEquationResidual(worst, MappingProxyType(out))


def random_trace_block(rng: np.random.Generator, names, target: Expression, degree: int, variables):
    """Random polynomial entries (X_alpha)^{names[beta]} whose diagonal sums to `target`."""
    k = len(names)
    comps = {(a, names[b]): random_polynomial(rng, variables, degree) for a in range(k) for b in range(k)}
    others = tuple(Neg(comps[(a, names[a])]) for a in range(k - 1))
    comps[(k - 1, names[k - 1])] = simplify(Add((target,) + others))
    return comps


def random_gauge(sys: KSymplecticSystem, rng: np.random.Generator, degree: int = 2) -> GaugeSpec:
    """A random polynomial gauge that satisfies the momentum trace constraint."""
    chart = sys.chart
    comps = {}
    for i in range(chart.n):
        comps.update(random_trace_block(rng, chart.p_names[i], momentum_trace_target(sys, i),
                                        degree, chart.coordinates))
    return GaugeSpec(comps)


def is_zero_field(X: KVectorField) -> bool:
    return all(is_zero(c) for row in X.components for c in row)


__all__ = [
    "CANONICAL", "CovectorResidual", "FieldEquationResidual", "GaugeSpec", "KSymplecticSystem",
    "NondegeneracyReport", "TwoFormBundle", "darboux_two_forms", "hamiltonian_kvf",
    "hdw_field_equations_residual", "hdw_residual", "momentum_trace_target", "nondegeneracy_check",
    "random_gauge",
]
