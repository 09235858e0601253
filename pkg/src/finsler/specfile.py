"""Metric and vector-field spec documents.

Spec files are TOML.  A metric file::

    name = "randers-minkowski"
    dim = 3
    F = "sqrt(y1^2 + y2^2 + y3^2) + b*y1"

    [params]
    b = 0.1

    [sample_region]
    x_min = -1.0          # scalar or list of dim values
    x_max = 1.0
    y_signs = [0, 0, 0]   # +1 / -1 force the sign of y_k, 0 leaves it free
    y_radius = 1.0

    [tolerances]
    c_reducible = 1e-6

A vector-field file holds ``components = ["-x1", "-x2"]`` (x-variables only),
or ``sigma = "<expr>"`` for a conformal factor whose gradient is taken.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from finsler import expr as ex
from finsler.errors import ParseError, SpecError

_METRIC_KEYS = {"name", "dim", "F", "params", "sample_region", "tolerances", "description"}
_REGION_KEYS = {"x_min", "x_max", "y_signs", "y_radius"}


@dataclass(frozen=True)
class SampleRegion:
    x_min: tuple[float, ...]
    x_max: tuple[float, ...]
    y_signs: tuple[int, ...]
    y_radius: float = 1.0

    def __post_init__(self):
        if any(lo > hi for lo, hi in zip(self.x_min, self.x_max)):
            raise SpecError("sample_region: x_min exceeds x_max")
        if any(s not in (-1, 0, 1) for s in self.y_signs):
            raise SpecError("sample_region: y_signs entries must be -1, 0 or 1")
        if not self.y_radius > 0:
            raise SpecError("sample_region: y_radius must be positive")

    @classmethod
    def default(cls, dim: int) -> "SampleRegion":
        return cls((-1.0,) * dim, (1.0,) * dim, (0,) * dim, 1.0)

    def to_dict(self) -> dict:
        return {
            "x_min": list(self.x_min),
            "x_max": list(self.x_max),
            "y_signs": list(self.y_signs),
            "y_radius": self.y_radius,
        }


@dataclass(frozen=True)
class MetricSpec:
    name: str
    dim: int
    expr: ex.Expr
    params: Mapping[str, float] = field(default_factory=dict)
    sample_region: SampleRegion | None = None
    tolerances: Mapping[str, float] = field(default_factory=dict)
    source: str = ""

    def __post_init__(self):
        if self.dim < 2:
            raise SpecError(f"dim must be >= 2, got {self.dim}")
        missing = ex.parameters(self.expr) - set(self.params)
        if missing:
            raise SpecError(f"unbound parameters: {', '.join(sorted(missing))}")
        if self.sample_region is None:
            object.__setattr__(self, "sample_region", SampleRegion.default(self.dim))
        r = self.sample_region
        if not (len(r.x_min) == len(r.x_max) == len(r.y_signs) == self.dim):
            raise SpecError("sample_region vectors must have dim entries")

    @property
    def text(self) -> str:
        return ex.to_source(self.expr)

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    def F(self, x, y) -> float:
        return float(ex.evaluate(self.expr, np.asarray(x, float), np.asarray(y, float), self.params))

    def digest(self) -> str:
        """Stable hash of the semantic content (expression, params, region, tolerances)."""
        h = hashlib.sha256()
        h.update(repr((self.name, self.dim, self.text, sorted(self.params.items()),
                       self.sample_region.to_dict(), sorted(self.tolerances.items()))).encode())
        return h.hexdigest()

    def scaled(self, factor: float, name: str | None = None) -> "MetricSpec":
        """The metric ``factor * F`` (same region and params)."""
        node = ex.BinOp("*", ex.Num(float(factor)), self.expr)
        return MetricSpec(name or f"{factor}*{self.name}", self.dim, node, dict(self.params),
                          self.sample_region, dict(self.tolerances))


@dataclass(frozen=True)
class VectorFieldSpec:
    """A vector field B^i(x) on the chart.

    Either one expression per component, or a scalar ``sigma`` whose gradient
    sigma_h = d sigma / d x^h is the field (derived with jets when evaluated).
    """

    dim: int
    components: tuple[ex.Expr, ...] = ()
    name: str = "field"
    params: Mapping[str, float] = field(default_factory=dict)
    sigma: ex.Expr | None = None

    def __post_init__(self):
        if (self.sigma is not None) == bool(self.components):
            raise SpecError("give exactly one of components or sigma")
        nodes = self.components if self.sigma is None else (self.sigma,)
        for c in nodes:
            if any(v.kind == "y" for v in ex.variables(c)):
                raise SpecError("vector fields may only depend on x")
            if ex.max_index(c, "x") > self.dim:
                raise SpecError(f"field references coordinates beyond dimension {self.dim}")
        if self.sigma is None and len(self.components) != self.dim:
            raise SpecError(f"expected {self.dim} components, got {len(self.components)}")
        missing = set().union(*(ex.parameters(c) for c in nodes)) - set(self.params)
        if missing:
            raise SpecError(f"unbound parameters: {', '.join(sorted(missing))}")

    @property
    def is_gradient(self) -> bool:
        return self.sigma is not None

    def describe(self) -> dict:
        if self.sigma is not None:
            return {"name": self.name, "sigma": ex.to_source(self.sigma)}
        return {"name": self.name, "components": [ex.to_source(c) for c in self.components]}

    @classmethod
    def constant(cls, values, name: str | None = None) -> "VectorFieldSpec":
        comps = tuple(ex.Num(float(v)) if v >= 0 else ex.Neg(ex.Num(-float(v))) for v in values)
        return cls(len(comps), comps, name or "const(" + ",".join(f"{float(v):g}" for v in values) + ")")

    @classmethod
    def from_strings(cls, comps, name: str = "field", params=None) -> "VectorFieldSpec":
        params = dict(params or {})
        dim = len(comps)
        return cls(dim, tuple(ex.parse_field_component(c, dim, params) for c in comps), name, params)

    @classmethod
    def gradient_of(cls, sigma: str, dim: int, name: str = "grad-sigma", params=None) -> "VectorFieldSpec":
        params = dict(params or {})
        return cls(dim, (), name, params, sigma=ex.parse_field_component(sigma, dim, params))


def _vec(value, dim: int, key: str) -> tuple:
    if isinstance(value, (int, float)):
        return (float(value),) * dim
    if not isinstance(value, list) or len(value) != dim:
        raise SpecError(f"sample_region.{key} must be a number or a list of {dim} numbers")
    return tuple(float(v) for v in value)


def metric_from_text(text: str, origin: str = "<string>") -> MetricSpec:
    """Build a :class:`MetricSpec` from a TOML document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{origin}: {exc}") from None
    unknown = set(doc) - _METRIC_KEYS
    if unknown:
        raise SpecError(f"{origin}: unknown keys {sorted(unknown)}")
    for key in ("name", "dim", "F"):
        if key not in doc:
            raise SpecError(f"{origin}: missing required key '{key}'")
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 2:
        raise SpecError(f"{origin}: dim must be an integer >= 2")
    params = {str(k): float(v) for k, v in doc.get("params", {}).items()}
    try:
        node = ex.parse_metric(doc["F"], dim, params)
    except ParseError as exc:
        raise ParseError(exc.message, exc.line, exc.column, exc.expected, exc.source, f"{origin}: F") from None
    reg = doc.get("sample_region", {})
    if set(reg) - _REGION_KEYS:
        raise SpecError(f"{origin}: unknown sample_region keys {sorted(set(reg) - _REGION_KEYS)}")
    region = SampleRegion(
        _vec(reg.get("x_min", -1.0), dim, "x_min"),
        _vec(reg.get("x_max", 1.0), dim, "x_max"),
        tuple(int(s) for s in _vec(reg.get("y_signs", 0), dim, "y_signs")),
        float(reg.get("y_radius", 1.0)),
    )
    tols = {str(k): float(v) for k, v in doc.get("tolerances", {}).items()}
    return MetricSpec(str(doc["name"]), dim, node, params, region, tols, source=text)


def load_metric(path: str | Path) -> MetricSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"{path}: {exc.strerror}") from None
    return metric_from_text(text, str(path))


def field_from_text(text: str, dim: int | None = None, origin: str = "<string>") -> VectorFieldSpec:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{origin}: {exc}") from None
    name = str(doc.get("name", Path(origin).stem))
    params = {str(k): float(v) for k, v in doc.get("params", {}).items()}
    if ("components" in doc) == ("sigma" in doc):
        raise SpecError(f"{origin}: give exactly one of 'components' or 'sigma'")
    try:
        if "sigma" in doc:
            if dim is None:
                dim = int(doc.get("dim", 0)) or None
            if dim is None:
                raise SpecError(f"{origin}: 'sigma' fields need the chart dimension")
            return VectorFieldSpec.gradient_of(doc["sigma"], dim, name, params)
        comps = doc["components"]
        if dim is not None and len(comps) != dim:
            raise SpecError(f"{origin}: expected {dim} components, got {len(comps)}")
        return VectorFieldSpec.from_strings(comps, name, params)
    except ParseError as exc:
        raise ParseError(exc.message, exc.line, exc.column, exc.expected, exc.source, origin) from None


def load_field(path: str | Path, dim: int | None = None) -> VectorFieldSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"{path}: {exc.strerror}") from None
    return field_from_text(text, dim, str(path))
