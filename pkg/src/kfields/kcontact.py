"""Polarised k-contact Hamiltonian systems in Darboux coordinates.

The contact form is eta^alpha = dz^alpha - p_i^alpha dq^i, so that
d eta^alpha = dq^i ^ dp_i^alpha and the Reeb fields are d/dz^alpha.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import ChartMismatch, GaugeConstraintViolated, SchemaError
from .expr import ONE, ZERO, Const, Expression, as_expression, differentiate, evaluate, simplify
from .expr.core import Add, Div, Mul, Neg, Var
from .geometry import DarbouxChart, KVectorField, random_points
from .ksymplectic import (
    CANONICAL,
    GAUGE_TOL,
    SKEW_TOL,
    CovectorResidual,
    GaugeSpec,
    _check_names,
    _max_abs_on_probes,
    _validate_gauge_keys,
    random_trace_block,
)
from .linalg import RANK_RTOL, numerical_rank


@dataclass(frozen=True, eq=False)
class KContactSystem:
    chart: DarbouxChart
    h: Expression
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.chart.has_z:
            raise SchemaError("a k-contact system needs a chart with z coordinates")
        object.__setattr__(self, "h", as_expression(self.h))
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        _check_names(self.h, self.chart, self.params)

    def bind(self, point: Mapping) -> dict:
        return {**self.params, **point}


@dataclass(frozen=True, eq=False)
class OneFormBundle:
    """eta^alpha covectors, shape (k, dim), and d eta^alpha matrices, shape (k, dim, dim)."""

    eta: np.ndarray
    d_eta: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        d_eta = np.asarray(self.d_eta, dtype=float)
        if eta.ndim != 2 or d_eta.shape != (eta.shape[0], eta.shape[1], eta.shape[1]):
            raise ValueError("expected eta of shape (k, dim) and d_eta of shape (k, dim, dim)")
        if np.max(np.abs(d_eta + np.swapaxes(d_eta, 1, 2)), initial=0.0) > SKEW_TOL:
            raise ValueError("d eta matrices must be skew-symmetric")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "d_eta", d_eta)

    @property
    def k(self) -> int:
        return self.eta.shape[0]

    @property
    def dim(self) -> int:
        return self.eta.shape[1]


def _d_eta(chart: DarbouxChart) -> np.ndarray:
    m = np.zeros((chart.k, chart.dim, chart.dim))
    for alpha in range(chart.k):
        for i in range(chart.n):
            a, b = chart.index(chart.q(i)), chart.index(chart.p(i, alpha))
            m[alpha, a, b] = 1.0
            m[alpha, b, a] = -1.0
    return m


def _eta(chart: DarbouxChart, point: Mapping) -> np.ndarray:
    """eta coefficients with trailing batch axes: shape (k, dim, *batch)."""
    shape = np.broadcast_shapes(*(np.shape(point[chart.p(i, a)])
                                  for i in range(chart.n) for a in range(chart.k)))
    out = np.zeros((chart.k, chart.dim) + shape)
    for alpha in range(chart.k):
        out[alpha, chart.index(chart.z(alpha))] = 1.0
        for i in range(chart.n):
            out[alpha, chart.index(chart.q(i))] = -np.asarray(point[chart.p(i, alpha)], dtype=float)
    return out


def darboux_contact_forms(chart: DarbouxChart, pt: Mapping) -> OneFormBundle:
    """eta^alpha = dz^alpha - p_i^alpha(pt) dq^i and its differential at one point."""
    if not chart.has_z:
        raise ChartMismatch("contact forms need a chart with z coordinates")
    return OneFormBundle(_eta(chart, {k: float(v) for k, v in pt.items()}), _d_eta(chart))


@dataclass(frozen=True)
class ContactAxiomReport:
    k: int
    eta_corank: int  # codimension of ker eta
    d_eta_kernel_rank: int  # dimension of ker d eta
    intersection_dim: int
    passed: bool

    @property
    def triple(self) -> tuple[int, int, int]:
        return (self.eta_corank, self.d_eta_kernel_rank, self.intersection_dim)


def contact_axiom_check(forms: OneFormBundle, rtol: float = RANK_RTOL) -> ContactAxiomReport:
    """Rank tests for: ker eta of corank k, ker d eta of rank k, trivial intersection."""
    k, dim = forms.k, forms.dim
    corank = numerical_rank(forms.eta, rtol)
    d_stack = forms.d_eta.reshape(k * dim, dim)
    kernel_rank = dim - numerical_rank(d_stack, rtol)
    both = np.vstack([forms.eta, d_stack])
    intersection = dim - numerical_rank(both, rtol)
    passed = corank == k and kernel_rank == k and intersection == 0
    return ContactAxiomReport(k, corank, kernel_rank, intersection, passed)


def reeb_fields(sys: KContactSystem | DarbouxChart) -> KVectorField:
    """R_alpha = d/dz^alpha."""
    chart = sys if isinstance(sys, DarbouxChart) else sys.chart
    rows = []
    for alpha in range(chart.k):
        row = [ZERO] * chart.dim
        row[chart.index(chart.z(alpha))] = ONE
        rows.append(tuple(row))
    return KVectorField(chart, tuple(rows))


def reeb_conditions(chart: DarbouxChart, pt: Mapping) -> tuple[np.ndarray, np.ndarray]:
    """(iota_{R_alpha} eta^beta, iota_{R_alpha} d eta^beta) at one point.

    Shapes (k, k) and (k, k, dim); the Reeb equations ask for the identity
    matrix and zeros respectively.
    """
    forms = darboux_contact_forms(chart, pt)
    R = reeb_fields(chart).evaluate({})  # (k, dim)
    eta_on_R = np.einsum("bd,ad->ab", forms.eta, R)
    d_eta_on_R = np.einsum("bdc,ad->abc", forms.d_eta, R)
    return eta_on_R, d_eta_on_R


def momentum_trace_target(sys: KContactSystem, i: int) -> Expression:
    """-(dh/dq^i + sum_beta p_i^beta dh/dz^beta)."""
    chart = sys.chart
    terms = [differentiate(sys.h, chart.q(i))]
    for beta in range(chart.k):
        terms.append(Mul((Var(chart.p(i, beta)), differentiate(sys.h, chart.z(beta)))))
    return simplify(Neg(Add(tuple(terms))))


def z_trace_target(sys: KContactSystem) -> Expression:
    """sum_{i,alpha} p_i^alpha dh/dp_i^alpha - h."""
    chart = sys.chart
    terms = [Mul((Var(chart.p(i, a)), differentiate(sys.h, chart.p(i, a))))
             for i in range(chart.n) for a in range(chart.k)]
    return simplify(Add(tuple(terms) + (Neg(sys.h),)))


def _diag_split(target: Expression, k: int) -> Expression:
    return target if k == 1 else simplify(Div(target, Const(k)))


def hamiltonian_kvf_contact(sys: KContactSystem, gauge: GaugeSpec = CANONICAL, *,
                            check: bool = True) -> KVectorField:
    """Assemble a k-contact Hamiltonian k-vector field from the Darboux relations.

    q-components are dh/dp_i^alpha; momentum and z components come from the
    gauge, whose diagonals must sum to the two trace targets.
    """
    chart, k = sys.chart, sys.chart.k
    _validate_gauge_keys(gauge, chart, sys.params, set(chart.momenta) | set(chart.z_names))
    rows = [[ZERO] * chart.dim for _ in range(k)]
    for alpha in range(k):
        for i in range(chart.n):
            rows[alpha][chart.index(chart.q(i))] = differentiate(sys.h, chart.p(i, alpha))

    blocks = [(chart.p_names[i], momentum_trace_target(sys, i), f"momentum trace for {chart.q(i)}")
              for i in range(chart.n)]
    blocks.append((chart.z_names, z_trace_target(sys), "z trace"))
    for names, target, label in blocks:
        for alpha in range(k):
            for beta in range(k):
                if gauge.canonical:
                    entry = _diag_split(target, k) if alpha == beta else ZERO
                else:
                    entry = gauge.get(alpha, names[beta])
                rows[alpha][chart.index(names[beta])] = entry
        if check:
            diag = tuple(rows[a][chart.index(names[a])] for a in range(k))
            bad = _max_abs_on_probes(Add(diag + (Neg(target),)), chart, sys.params)
            if bad > GAUGE_TOL:
                raise GaugeConstraintViolated(f"{label} misses its target by {bad:.3g}")
    return KVectorField(chart, tuple(tuple(r) for r in rows), sys.params)


@dataclass(frozen=True, eq=False)
class ContactResidual:
    first: CovectorResidual  # sum iota_{X_a} d eta^a - dh + sum (R_a h) eta^a
    second: np.ndarray  # sum iota_{X_a} eta^a + h, shape batch

    @property
    def max_norm(self) -> float:
        return max(self.first.max_norm, float(np.max(np.abs(self.second), initial=0.0)))


def contact_hdw_residual(sys: KContactSystem, X: KVectorField, pt: Mapping) -> ContactResidual:
    """Residuals of both k-contact HDW equations, summed over alpha, at `pt`."""
    if X.chart != sys.chart:
        raise ChartMismatch("k-vector field and system use different charts")
    chart = sys.chart
    binding = sys.bind({**X.params, **pt})
    shape = np.broadcast_shapes(*(np.shape(v) for v in pt.values())) if pt else ()
    Xv = X.evaluate(pt)  # (k, dim, *batch)
    eta = _eta(chart, {n: np.broadcast_to(np.asarray(pt[n], dtype=float), shape) for n in chart.momenta})
    d_eta = _d_eta(chart)
    dh = np.array([np.broadcast_to(evaluate(differentiate(sys.h, c), binding), shape)
                   for c in chart.coordinates])
    R = reeb_fields(chart).evaluate({})  # (k, dim)
    reeb_h = np.einsum("ad,d...->a...", R, dh)
    first = np.einsum("adc,ad...->c...", d_eta, Xv) - dh + np.einsum("a...,ac...->c...", reeb_h, eta)
    h = np.broadcast_to(evaluate(sys.h, binding), shape)
    second = np.einsum("ad...,ad...->...", eta, Xv) + h
    return ContactResidual(CovectorResidual(first, float(np.max(np.abs(first), initial=0.0))),
                           np.asarray(second))


def random_contact_gauge(sys: KContactSystem, rng: np.random.Generator, degree: int = 2,
                         z_free: bool = True) -> GaugeSpec:
    """Random polynomial gauge satisfying both trace constraints.

    With ``z_free`` the entries only involve q and p, so the resulting field
    is projectable whenever h is z-independent.
    """
    chart = sys.chart
    variables = [c for c in chart.coordinates if not (z_free and c in chart.z_names)]
    comps = {}
    for i in range(chart.n):
        comps.update(random_trace_block(rng, chart.p_names[i], momentum_trace_target(sys, i),
                                        degree, variables))
    comps.update(random_trace_block(rng, chart.z_names, z_trace_target(sys), degree, variables))
    return GaugeSpec(comps)


def probe_points(chart: DarbouxChart, count: int, seed: int, ranges=None) -> dict:
    return random_points(chart, count, np.random.default_rng(seed), ranges)
