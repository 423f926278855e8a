"""Contactification of exact k-symplectic systems and projection of solutions.

A k-symplectic system on P is lifted to M = P x R^k with the same
(z-independent) Hamiltonian. A contact Hamiltonian k-vector field whose q
and p components do not depend on z pushes forward along pr_1: M -> P, and
the pushed-forward field solves the k-symplectic HDW equation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ChartMismatch, NotProjectable
from .expr import Const, differentiate, evaluate, simplify
from .expr.core import Add, Div, Mul, Var
from .geometry import KVectorField, random_points
from .kcontact import KContactSystem, hamiltonian_kvf_contact, z_trace_target
from .ksymplectic import CANONICAL, GaugeSpec, KSymplecticSystem, hdw_residual

PROJECTABILITY_PROBES = 50
PROJECTABILITY_TOL = 1e-12
PROPOSITION_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ContactificationPair:
    source: KSymplecticSystem
    target: KContactSystem

    def embed(self, point: Mapping, z=0.0) -> dict:
        """(q, p) -> (q, p, z); `z` is a scalar or one value per z coordinate."""
        zs = np.broadcast_to(np.asarray(z, dtype=float), (self.target.chart.k,))
        out = dict(point)
        for name, val in zip(self.target.chart.z_names, zs):
            out[name] = val
        return out

    def project_point(self, point: Mapping) -> dict:
        """pr_1: (q, p, z) -> (q, p)."""
        return {n: point[n] for n in self.source.chart.coordinates}


def contactify(sys: KSymplecticSystem, z_names: Sequence[str] = ()) -> ContactificationPair:
    """Lift (P, omega, h) to (P x R^k, eta, h_M = pr_1^* h)."""
    chart = sys.chart.with_z(z_names)
    return ContactificationPair(sys, KContactSystem(chart, sys.h, sys.params))


@dataclass(frozen=True)
class ProjectabilityReport:
    projectable: bool
    # (alpha, coordinate, z coordinate, derivative expression, point) of the first violation
    witness: tuple | None = None


def is_projectable(X: KVectorField, probes: int = PROJECTABILITY_PROBES, seed: int = 0,
                   tol: float = PROJECTABILITY_TOL) -> ProjectabilityReport:
    """True iff no q or p component of any X_alpha depends on any z^beta.

    Each z-derivative is computed symbolically; a derivative that does not
    simplify to the zero constant is evaluated at seeded probe points and
    only counts as a violation when it exceeds `tol` somewhere.
    """
    chart = X.chart
    if not chart.has_z:
        raise ChartMismatch("projectability is defined for fields on a chart with z coordinates")
    pts = None
    base = [c for c in chart.coordinates if c not in chart.z_names]
    for alpha in range(X.k):
        for name in base:
            comp = X.component(alpha, name)
            for zb in chart.z_names:
                d = differentiate(comp, zb)
                if isinstance(d, Const) and d.value == 0:
                    continue
                if pts is None:
                    pts = random_points(chart, probes, np.random.default_rng(seed))
                vals = np.broadcast_to(np.abs(evaluate(d, {**X.params, **pts})), (probes,))
                bad = np.flatnonzero(vals > tol)
                if bad.size:
                    j = int(bad[0])
                    point = {c: float(pts[c][j]) for c in chart.coordinates}
                    return ProjectabilityReport(False, (alpha, name, zb, str(d), point))
    return ProjectabilityReport(True)


def project(X: KVectorField) -> KVectorField:
    """Push a projectable field forward along pr_1 by dropping the z components."""
    report = is_projectable(X)
    if not report.projectable:
        alpha, name, zb, _, _ = report.witness
        raise NotProjectable(f"X{alpha + 1}[{name}] depends on {zb}", report.witness)
    chart = X.chart
    keep = [chart.index(c) for c in chart.coordinates if c not in chart.z_names]
    rows = tuple(tuple(row[j] for j in keep) for row in X.components)
    return KVectorField(chart.without_z(), rows, X.params)


@dataclass(frozen=True, eq=False)
class PropositionReport:
    gauge: dict
    residuals: np.ndarray  # per-probe max-norm of the k-symplectic HDW residual
    tol: float
    projected: KVectorField = field(repr=False)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals, initial=0.0))

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "gauge": self.gauge,
            "probes": len(self.residuals),
            "per_probe_residual": [float(r) for r in self.residuals],
            "max_residual": self.max_residual,
            "tolerance": self.tol,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def verify_proposition(sys: KSymplecticSystem, gauge: GaugeSpec = CANONICAL,
                       points: Mapping | None = None, *, probes: int = 50, seed: int = 0,
                       tol: float = PROPOSITION_TOL, ranges=None) -> PropositionReport:
    """contactify -> contact HDW field -> projectability -> projection -> k-symplectic residual.

    `gauge` is a gauge of the contact system (keys may name z coordinates).
    Raises NotProjectable when the assembled field depends on z.
    """
    pair = contactify(sys)
    XM = hamiltonian_kvf_contact(pair.target, gauge)
    XP = project(XM)
    if points is None:
        points = random_points(sys.chart, probes, np.random.default_rng(seed), ranges)
    res = hdw_residual(sys, XP, points)
    return PropositionReport(gauge.describe(), res.per_point(), tol, XP)


def damped_lift(sys: KSymplecticSystem, gamma: float, z_index: int = 0) -> KContactSystem:
    """Contact system with Hamiltonian h_M + gamma * z^(z_index+1)."""
    pair = contactify(sys)
    chart = pair.target.chart
    h = simplify(Add((sys.h, Mul((Const(gamma), Var(chart.z(z_index)))))))
    return KContactSystem(chart, h, sys.params)


def extend_gauge(gauge: GaugeSpec, target: KContactSystem) -> GaugeSpec:
    """Contact gauge with the momentum entries of a k-symplectic gauge.

    z entries get the canonical diagonal split of the z trace. For a lifted
    (z-independent) Hamiltonian both momentum traces coincide, so a valid
    k-symplectic gauge stays valid.
    """
    if gauge.canonical:
        return gauge
    chart, k = target.chart, target.chart.k
    comps = dict(gauge.components)
    split = simplify(Div(z_trace_target(target), Const(k)))
    for alpha in range(k):
        for beta in range(k):
            comps[(alpha, chart.z(beta))] = split if alpha == beta else Const(0.0)
    return GaugeSpec(comps)


def z_dependent_gauge(target: KContactSystem, strength: float = 1.0) -> GaugeSpec:
    """Canonical contact gauge plus strength * z^1 on the off-diagonal entry X1[p_1^2].

    Off-diagonal momentum entries are unconstrained, so the field still
    solves the k-contact equations but is no longer pr_1-projectable. Needs k >= 2.
    """
    chart = target.chart
    if chart.k < 2:
        raise ValueError("off-diagonal gauge freedom needs k >= 2")
    base = hamiltonian_kvf_contact(target)
    comps = {}
    for alpha in range(chart.k):
        for name in chart.momenta + chart.z_names:
            comps[(alpha, name)] = base.component(alpha, name)
    key = (0, chart.p(0, 1))
    comps[key] = simplify(Add((comps[key], Mul((Const(strength), Var(chart.z(0)))))))
    return GaugeSpec(comps)
