"""Darboux charts, k-vector fields, sampled sections and their residuals."""
from __future__ import annotations

import csv
import io
import itertools
import os
import tempfile
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ChartMismatch, GridTooSmall, SchemaError
from .expr import ZERO, Expression, as_expression, differentiate, evaluate, simplify
from .expr.core import Add, Mul, Neg, is_zero

BRACKET_TOL = 1e-10


@dataclass(frozen=True)
class DarbouxChart:
    """Coordinates (q^i, p_i^alpha[, z^alpha]) with fixed ordering.

    Order: all q, then p grouped by i then alpha, then all z. Default
    names are ``q1``, ``p1_2`` (for p_1^2) and ``z1``. Indices passed to
    the accessor methods are 0-based.
    """

    n: int
    k: int
    has_z: bool = False
    q_names: tuple[str, ...] = ()
    p_names: tuple[tuple[str, ...], ...] = ()
    z_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise SchemaError("n and k must be positive integers")
        q = tuple(self.q_names) or tuple(f"q{i + 1}" for i in range(self.n))
        p = tuple(tuple(row) for row in self.p_names) or tuple(
            tuple(f"p{i + 1}_{a + 1}" for a in range(self.k)) for i in range(self.n)
        )
        z = tuple(self.z_names) or (tuple(f"z{a + 1}" for a in range(self.k)) if self.has_z else ())
        if len(q) != self.n:
            raise SchemaError(f"expected {self.n} q coordinates, got {len(q)}")
        if len(p) != self.n or any(len(row) != self.k for row in p):
            raise SchemaError(f"momenta must form {self.n} blocks of {self.k} names")
        if self.has_z and len(z) != self.k:
            raise SchemaError(f"expected {self.k} z coordinates, got {len(z)}")
        if not self.has_z and z:
            raise SchemaError("z coordinates given for a chart without z")
        object.__setattr__(self, "q_names", q)
        object.__setattr__(self, "p_names", p)
        object.__setattr__(self, "z_names", z)
        names = self.coordinates
        if len(set(names)) != len(names):
            raise SchemaError(f"coordinate names are not distinct: {names}")
        if any(not isinstance(s, str) or not s for s in names):
            raise SchemaError("coordinate names must be nonempty strings")

    @property
    def coordinates(self) -> tuple[str, ...]:
        return self.q_names + tuple(itertools.chain.from_iterable(self.p_names)) + self.z_names

    @property
    def dim(self) -> int:
        return self.n + self.n * self.k + (self.k if self.has_z else 0)

    def q(self, i: int) -> str:
        return self.q_names[i]

    def p(self, i: int, alpha: int) -> str:
        return self.p_names[i][alpha]

    def z(self, alpha: int) -> str:
        return self.z_names[alpha]

    @property
    def momenta(self) -> tuple[str, ...]:
        return tuple(itertools.chain.from_iterable(self.p_names))

    def index(self, name: str) -> int:
        try:
            return self.coordinates.index(name)
        except ValueError:
            raise ChartMismatch(f"{name!r} is not a coordinate of this chart") from None

    def with_z(self, z_names: Sequence[str] = ()) -> "DarbouxChart":
        if self.has_z:
            raise ChartMismatch("chart already has z coordinates")
        if not z_names:
            taken = set(self.coordinates)
            z_names = tuple(f"z{a + 1}" for a in range(self.k))
            if taken & set(z_names):
                z_names = tuple(f"zeta{a + 1}" for a in range(self.k))
        return replace(self, has_z=True, z_names=tuple(z_names))

    def without_z(self) -> "DarbouxChart":
        return replace(self, has_z=False, z_names=())


def random_points(chart_or_names, count: int, rng: np.random.Generator, ranges: Mapping | None = None):
    """Uniform probe points, one array of length `count` per coordinate.

    Default range is [-1, 1]; `ranges` maps names to (low, high).
    """
    names = chart_or_names.coordinates if isinstance(chart_or_names, DarbouxChart) else tuple(chart_or_names)
    ranges = ranges or {}
    out = {}
    for name in names:
        lo, hi = ranges.get(name, (-1.0, 1.0))
        out[name] = rng.uniform(lo, hi, size=count)
    return out


def _freeze(params):
    return MappingProxyType(dict(params or {}))


@dataclass(frozen=True, eq=False)
class VectorField:
    chart: DarbouxChart
    components: tuple[Expression, ...]
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        comps = tuple(as_expression(c) for c in self.components)
        if len(comps) != self.chart.dim:
            raise ChartMismatch(f"expected {self.chart.dim} components, got {len(comps)}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "params", _freeze(self.params))
        allowed = set(self.chart.coordinates) | set(self.params)
        for c in comps:
            extra = c.free_variables() - allowed
            if extra:
                raise ChartMismatch(f"component {c} uses names outside the chart: {sorted(extra)}")

    def __getitem__(self, name: str) -> Expression:
        return self.components[self.chart.index(name)]

    def evaluate(self, point: Mapping) -> np.ndarray:
        b = {**self.params, **point}
        return np.array([np.broadcast_to(evaluate(c, b), _batch_shape(point)) for c in self.components])

    def apply(self, f: Expression) -> Expression:
        """Directional derivative X(f) as an expression."""
        terms = []
        for name, comp in zip(self.chart.coordinates, self.components):
            if is_zero(comp):
                continue
            df = differentiate(f, name)
            if not is_zero(df):
                terms.append(Mul((comp, df)))
        return simplify(Add(tuple(terms))) if terms else ZERO

    def is_zero(self) -> bool:
        return all(is_zero(c) for c in self.components)

    def __str__(self):
        parts = [f"({c})*d/d{n}" for n, c in zip(self.chart.coordinates, self.components) if not is_zero(c)]
        return " + ".join(parts) or "0"


@dataclass(frozen=True, eq=False)
class KVectorField:
    """k-tuple (X_1, ..., X_k); `components[alpha][c]` is (X_alpha)^c."""

    chart: DarbouxChart
    components: tuple[tuple[Expression, ...], ...]
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.components) != self.chart.k:
            raise ChartMismatch(f"expected {self.chart.k} vector fields, got {len(self.components)}")
        fields = tuple(VectorField(self.chart, row, self.params) for row in self.components)
        object.__setattr__(self, "components", tuple(f.components for f in fields))
        object.__setattr__(self, "params", _freeze(self.params))
        object.__setattr__(self, "_fields", fields)

    @classmethod
    def zero(cls, chart: DarbouxChart, params=None) -> "KVectorField":
        return cls(chart, tuple((ZERO,) * chart.dim for _ in range(chart.k)), params or {})

    @property
    def k(self) -> int:
        return self.chart.k

    def field(self, alpha: int) -> VectorField:
        return self._fields[alpha]

    @property
    def fields(self) -> tuple[VectorField, ...]:
        return self._fields

    def component(self, alpha: int, name: str) -> Expression:
        return self.components[alpha][self.chart.index(name)]

    def with_component(self, alpha: int, name: str, expr) -> "KVectorField":
        rows = [list(r) for r in self.components]
        rows[alpha][self.chart.index(name)] = as_expression(expr)
        return KVectorField(self.chart, tuple(tuple(r) for r in rows), self.params)

    def evaluate(self, point: Mapping) -> np.ndarray:
        """Array of shape (k, dim, *batch)."""
        return np.array([f.evaluate(point) for f in self._fields])

    def lines(self) -> list[str]:
        return [
            f"X{a + 1}[{name}] = {comp}"
            for a, row in enumerate(self.components)
            for name, comp in zip(self.chart.coordinates, row)
        ]

    def __str__(self):
        return "\n".join(self.lines())


def _batch_shape(point: Mapping) -> tuple[int, ...]:
    shapes = [np.shape(v) for v in point.values()]
    return np.broadcast_shapes(*shapes) if shapes else ()


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """[X, Y]^c = sum_d X^d dY^c/dx^d - Y^d dX^c/dx^d, symbolically."""
    if X.chart != Y.chart:
        raise ChartMismatch("vector fields live on different charts")
    comps = []
    for xc, yc in zip(X.components, Y.components):
        comps.append(simplify(Add((X.apply(yc), Neg(Y.apply(xc))))))
    return VectorField(X.chart, tuple(comps), {**X.params, **Y.params})


@dataclass(frozen=True)
class IntegrabilityReport:
    integrable: bool
    max_norm: float
    worst: tuple | None  # (alpha, beta, coordinate, point index) of the largest bracket entry


def is_integrable(X: KVectorField, points: Mapping, tol: float = BRACKET_TOL) -> IntegrabilityReport:
    """Check [X_alpha, X_beta] = 0 at the sample points (0-based indices)."""
    worst, worst_val = None, 0.0
    for a, b in itertools.combinations(range(X.k), 2):
        br = lie_bracket(X.field(a), X.field(b))
        vals = np.abs(br.evaluate(points)).reshape(X.chart.dim, -1)
        if vals.size == 0:
            continue
        c, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
        if vals[c, j] > worst_val:
            worst_val = float(vals[c, j])
            worst = (a, b, X.chart.coordinates[c], int(j))
    return IntegrabilityReport(worst_val <= tol, worst_val, worst)


# -- sampled sections ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SectionGrid:
    """A map phi: U in R^k -> chart sampled on a uniform rectangular grid.

    `axes` holds the parameter values t^alpha (k = 1 or 2); `values` maps
    each coordinate name to an array of the grid shape.
    """

    axes: tuple[np.ndarray, ...]
    values: Mapping[str, np.ndarray]

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if len(axes) not in (1, 2):
            raise SchemaError("section grids support k = 1 or 2 parameters")
        for a in axes:
            if a.ndim != 1 or a.size < 2:
                raise SchemaError("each axis must be a 1-D array with at least two nodes")
            d = np.diff(a)
            if np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-9, atol=0):
                raise SchemaError("axes must be uniform with positive spacing")
        shape = tuple(a.size for a in axes)
        values = {}
        for name, arr in self.values.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise SchemaError(f"array for {name!r} has shape {arr.shape}, grid is {shape}")
            values[name] = arr
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", MappingProxyType(values))

    @property
    def k(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(float(a[1] - a[0]) for a in self.axes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.values)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        params = [f"t{a + 1}" for a in range(self.k)]
        writer.writerow(params + list(self.names))
        mesh = np.meshgrid(*self.axes, indexing="ij")
        cols = [m.ravel() for m in mesh] + [self.values[n].ravel() for n in self.names]
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        write_atomic(path, self.to_csv_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "SectionGrid":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], np.array([[float(v) for v in r] for r in rows[1:] if r])
        k = sum(1 for h in header if h in ("t1", "t2"))
        if header[:k] != [f"t{a + 1}" for a in range(k)] or k == 0:
            raise SchemaError("CSV header must start with t1[,t2]")
        axes = tuple(np.unique(body[:, a]) for a in range(k))
        shape = tuple(a.size for a in axes)
        if body.shape[0] != int(np.prod(shape)):
            raise SchemaError("CSV rows do not form a full rectangular grid")
        values = {name: body[:, k + j].reshape(shape) for j, name in enumerate(header[k:])}
        return cls(axes, values)

    @classmethod
    def read_csv(cls, path) -> "SectionGrid":
        with open(path) as fh:
            return cls.from_csv_text(fh.read())


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sample_section(axes: Sequence[np.ndarray], exprs: Mapping[str, Expression], params=None,
                   parameter_names: Sequence[str] = ("t1", "t2")) -> SectionGrid:
    """Sample closed-form coordinate expressions of the parameters on a grid."""
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    binding = {**(params or {}), **dict(zip(parameter_names, mesh))}
    values = {n: np.broadcast_to(evaluate(as_expression(e), binding), mesh[0].shape).copy()
              for n, e in exprs.items()}
    return SectionGrid(axes, values)


@dataclass(frozen=True, eq=False)
class Prolongation:
    points: Mapping[str, np.ndarray]
    tangents: tuple[Mapping[str, np.ndarray], ...]  # tangents[alpha][name] = d phi^name / d t^alpha


def prolong(s: SectionGrid) -> Prolongation:
    """First prolongation: centered differences inside, one-sided 2nd order at edges."""
    if any(n < 3 for n in s.shape):
        raise GridTooSmall(f"need at least 3 nodes per axis, grid is {s.shape}")
    tangents = []
    for alpha, h in enumerate(s.spacings):
        tangents.append(MappingProxyType({
            name: np.gradient(arr, h, axis=alpha, edge_order=2) for name, arr in s.values.items()
        }))
    return Prolongation(s.values, tuple(tangents))


def interior(arr: np.ndarray) -> np.ndarray:
    return arr[tuple(slice(1, -1) for _ in range(arr.ndim))]


@dataclass(frozen=True, eq=False)
class SectionResidual:
    max_norm: float
    residuals: Mapping[tuple[int, str], np.ndarray]  # full-grid residual per (alpha, coordinate)


def integral_section_residual(X: KVectorField, s: SectionGrid,
                              coordinates: Iterable[str] | None = None) -> SectionResidual:
    """Residual of d phi^c / d t^alpha = (X_alpha)^c o phi.

    The max-norm is taken over interior grid nodes. `coordinates` restricts
    the check to a subset of chart coordinates.
    """
    if X.k != s.k:
        raise ChartMismatch(f"k-vector field has k = {X.k}, section has k = {s.k}")
    missing = set(X.chart.coordinates) - set(s.names)
    if missing:
        raise ChartMismatch(f"section lacks coordinates {sorted(missing)}")
    names = tuple(coordinates) if coordinates is not None else X.chart.coordinates
    pro = prolong(s)
    binding = {**X.params, **{n: s.values[n] for n in X.chart.coordinates}}
    out, worst = {}, 0.0
    for alpha in range(X.k):
        for name in names:
            comp = X.component(alpha, name)
            target = np.broadcast_to(evaluate(comp, binding), s.shape)
            r = pro.tangents[alpha][name] - target
            out[(alpha, name)] = r
            inner = interior(r)
            if inner.size:
                worst = max(worst, float(np.max(np.abs(inner))))
    return SectionResidual(worst, MappingProxyType(out))
