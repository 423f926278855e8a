"""YAML system-definition files.

Example (the vibrating string)::

    n: 1
    k: 2
    coordinates:
      q: [u]
      p: [[pt, px]]     # p[i] lists p_i^1 .. p_i^k
    parameters: {rho: 1.0, tau: 1.0}
    hamiltonian: "pt^2/(2*rho) - px^2/(2*tau)"
    gauge:              # optional; omitted entries are zero
      X1: {pt: "0", px: "0"}
      X2: {pt: "0", px: "0"}
    probes:             # optional sampling ranges, default [-1, 1]
      u: [-2, 2]

``contact: true`` declares a k-contact system; its z coordinates default
to z1..zk or are listed under ``coordinates.z``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import yaml

from .errors import ParseError, SchemaError
from .expr import parse
from .geometry import DarbouxChart
from .kcontact import KContactSystem
from .ksymplectic import GaugeSpec, KSymplecticSystem

_KEYS = {"n", "k", "contact", "coordinates", "parameters", "hamiltonian", "gauge", "probes"}


@dataclass(frozen=True, eq=False)
class SystemFile:
    system: KSymplecticSystem | KContactSystem
    gauge: GaugeSpec | None
    ranges: dict

    @property
    def contact(self) -> bool:
        return isinstance(self.system, KContactSystem)


def _load_yaml(text: str, source: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise SchemaError(f"{source}: invalid YAML{where}: {getattr(exc, 'problem', exc)}") from None


def _expr(text, where: str):
    if isinstance(text, bool) or not isinstance(text, (str, int, float)):
        raise SchemaError(f"{where}: expected an expression string")
    try:
        return parse(str(text))
    except ParseError as exc:
        raise SchemaError(f"{where}: {exc.message} at column {exc.position + 1} in {exc.text!r}") from None


def _int(data, key, source):
    v = data.get(key)
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise SchemaError(f"{source}: '{key}' must be a positive integer")
    return v


def parse_gauge(table, chart: DarbouxChart, where: str) -> GaugeSpec:
    if table == "canonical":
        return GaugeSpec(canonical=True)
    if not isinstance(table, Mapping):
        raise SchemaError(f"{where}: gauge must be a mapping X1: {{coordinate: expression}}")
    comps = {}
    for key, row in table.items():
        key = str(key)
        if not (key.startswith("X") and key[1:].isdigit() and 1 <= int(key[1:]) <= chart.k):
            raise SchemaError(f"{where}: gauge key {key!r} must be X1..X{chart.k}")
        if not isinstance(row, Mapping):
            raise SchemaError(f"{where}: gauge entry {key} must map coordinates to expressions")
        for name, text in row.items():
            if str(name) not in chart.coordinates:
                raise SchemaError(f"{where}: gauge entry {key}[{name}] names an unknown coordinate")
            comps[(int(key[1:]) - 1, str(name))] = _expr(text, f"{where}: gauge {key}[{name}]")
    return GaugeSpec(comps)


def system_from_mapping(data, source: str = "<system>") -> SystemFile:
    if not isinstance(data, Mapping):
        raise SchemaError(f"{source}: top level must be a mapping")
    unknown = set(data) - _KEYS
    if unknown:
        raise SchemaError(f"{source}: unknown fields {sorted(unknown)}")
    n, k = _int(data, "n", source), _int(data, "k", source)
    contact = bool(data.get("contact", False))
    coords = data.get("coordinates") or {}
    if not isinstance(coords, Mapping):
        raise SchemaError(f"{source}: 'coordinates' must be a mapping")
    q = tuple(str(c) for c in coords.get("q", ()))
    p_raw = coords.get("p", ())
    if p_raw and not all(isinstance(row, (list, tuple)) for row in p_raw):
        raise SchemaError(f"{source}: coordinates.p must be a list of momentum blocks")
    p = tuple(tuple(str(c) for c in row) for row in p_raw)
    z = tuple(str(c) for c in coords.get("z", ()))
    if p and (len(p) != n or any(len(row) != k for row in p)):
        raise SchemaError(f"{source}: coordinates.p must hold {n} block(s) of {k} momenta")
    try:
        chart = DarbouxChart(n, k, contact, q, p, z)
    except SchemaError as exc:
        raise SchemaError(f"{source}: {exc}") from None
    params = data.get("parameters") or {}
    if not isinstance(params, Mapping) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in params.values()):
        raise SchemaError(f"{source}: parameters must map names to numbers")
    params = {str(a): float(b) for a, b in params.items()}
    if "hamiltonian" not in data:
        raise SchemaError(f"{source}: missing 'hamiltonian'")
    h = _expr(data["hamiltonian"], f"{source}: hamiltonian")
    cls = KContactSystem if contact else KSymplecticSystem
    try:
        system = cls(chart, h, params)
    except SchemaError as exc:
        raise SchemaError(f"{source}: {exc}") from None
    gauge = parse_gauge(data["gauge"], chart, source) if data.get("gauge") is not None else None
    ranges = {}
    for name, rng in (data.get("probes") or {}).items():
        if str(name) not in chart.coordinates or not isinstance(rng, (list, tuple)) or len(rng) != 2:
            raise SchemaError(f"{source}: probes.{name} must be [low, high] for a coordinate")
        ranges[str(name)] = (float(rng[0]), float(rng[1]))
    return SystemFile(system, gauge, ranges)


def load_system(path) -> SystemFile:
    path = Path(path)
    return system_from_mapping(_load_yaml(path.read_text(), str(path)), str(path))


def load_gauge(path, chart: DarbouxChart) -> GaugeSpec:
    path = Path(path)
    data = _load_yaml(path.read_text(), str(path))
    if isinstance(data, Mapping) and "gauge" in data:
        data = data["gauge"]
    return parse_gauge(data, chart, str(path))


def load_mapping(path) -> dict:
    path = Path(path)
    data = _load_yaml(path.read_text(), str(path))
    if not isinstance(data, Mapping):
        raise SchemaError(f"{path}: top level must be a mapping")
    return dict(data)
