"""Vector fields, moduli of continuity, sampled paths and path classes."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from . import expr as ex

__all__ = [
    "RationalInterval",
    "VectorField",
    "Modulus",
    "LinearModulus",
    "PowerModulus",
    "TableModulus",
    "ModulusSet",
    "SampledPath",
    "PathClass",
    "FREE",
    "evaluate",
    "translate",
    "difference",
    "scale",
    "merge_moduli", "MaxModulus",
    "shared_modulus",
    "as_fraction",
    "modulus_from_json",
    "modulus_to_json",
]

Number = Union[int, float, str, Fraction]


def as_fraction(v: Number) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(v)
    return Fraction(v)


@dataclass(frozen=True)
class RationalInterval:
    """Closed interval ``[q1, q2]`` with exact rational endpoints."""

    q1: Fraction
    q2: Fraction

    def __init__(self, q1: Number, q2: Number):
        a, b = as_fraction(q1), as_fraction(q2)
        if not a < b:
            raise ValueError(f"empty interval [{a}, {b}]")
        object.__setattr__(self, "q1", a)
        object.__setattr__(self, "q2", b)

    @classmethod
    def symmetric(cls, r: Number) -> "RationalInterval":
        r = as_fraction(r)
        return cls(-r, r)

    @property
    def lo(self) -> float:
        return float(self.q1)

    @property
    def hi(self) -> float:
        return float(self.q2)

    @property
    def length(self) -> float:
        return float(self.q2 - self.q1)

    def shift(self, by: Number) -> "RationalInterval":
        by = as_fraction(by)
        return RationalInterval(self.q1 + by, self.q2 + by)

    def contains(self, other: "RationalInterval") -> bool:
        return self.q1 <= other.q1 and other.q2 <= self.q2

    def __str__(self):
        return f"[{self.q1},{self.q2}]"

    def to_json(self):
        return [str(self.q1), str(self.q2)]

    @classmethod
    def from_json(cls, obj) -> "RationalInterval":
        if isinstance(obj, RationalInterval):
            return obj
        a, b = obj
        return cls(a, b)


# ---------------------------------------------------------------------------
# vector fields


@dataclass(frozen=True)
class VectorField:
    """A field ``f(t, x, u)`` with ``x, u`` in R^N given by N expression trees.

    ``declared`` holds extra breakpoints; the effective :attr:`breakpoints`
    always include every piecewise switch time of the body.
    """

    dim: int
    body: tuple
    declared: tuple = ()
    regularity: str = "LC"
    p: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("state dimension must be positive")
        if len(self.body) != self.dim:
            raise ValueError(f"field of dimension {self.dim} needs {self.dim} components")
        if self.regularity not in ("LC", "SC"):
            raise ValueError("regularity must be 'LC' or 'SC'")
        if self.p < 1:
            raise ValueError("integrability exponent must be >= 1")

    @classmethod
    def parse(cls, text: Union[str, Sequence[str]], dim: int | None = None,
              params: Mapping[str, float] | None = None, **kw) -> "VectorField":
        texts = [text] if isinstance(text, str) else list(text)
        body = tuple(ex.parse(s, params) for s in texts)
        return cls(dim or len(body), body, **kw)

    @classmethod
    def constant(cls, value: float, dim: int = 1) -> "VectorField":
        return cls(dim, tuple(ex.Const(float(value)) for _ in range(dim)))

    @cached_property
    def breakpoints(self) -> tuple:
        pts = set(float(b) for b in self.declared)
        for comp in self.body:
            pts.update(ex.breakpoints(comp))
        return tuple(sorted(pts))

    @cached_property
    def _compiled(self):
        return [ex.compile_expr(c) for c in self.body]

    @property
    def autonomous(self) -> bool:
        return not any(ex.uses_var(c, "t") for c in self.body)

    def depends_on_u(self) -> bool:
        return any(ex.uses_var(c, f"u{k + 1}") for c in self.body for k in range(self.dim))

    def eval(self, t, X, U) -> np.ndarray:
        """Vectorized evaluation; ``X``/``U`` have trailing axis N.

        Returns an array of shape ``broadcast(t, X[..., 0], U[..., 0]) + (N,)``.
        """
        X = np.asarray(X, dtype=float)
        U = np.asarray(U, dtype=float)
        if X.shape[-1:] != (self.dim,) or U.shape[-1:] != (self.dim,):
            raise ValueError(f"points must have trailing dimension {self.dim}")
        xs = [X[..., k] for k in range(self.dim)]
        us = [U[..., k] for k in range(self.dim)]
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(t.shape, xs[0].shape, us[0].shape)
        out = np.empty(shape + (self.dim,))
        for k, fn in enumerate(self._compiled):
            out[..., k] = fn(t, xs, us)
        return out

    def __call__(self, t, x, u) -> np.ndarray:
        return evaluate(self, t, x, u)

    def to_json(self) -> dict:
        exprs = [ex.to_json(c) for c in self.body]
        return {
            "dim": self.dim,
            "expr": exprs[0] if self.dim == 1 else exprs,
            "breakpoints": list(self.breakpoints),
            "regularity": {"class": self.regularity, "p": self.p},
        }

    @classmethod
    def from_json(cls, obj) -> "VectorField":
        if isinstance(obj, VectorField):
            return obj
        if isinstance(obj, str):
            return cls.parse(obj)
        raw = obj["expr"]
        dim = int(obj.get("dim", 1))
        comps = [raw] if dim == 1 and not isinstance(raw, list) else list(raw)
        params = obj.get("params")
        body = tuple(ex.parse(c, params) if isinstance(c, str) else ex.from_json(c) for c in comps)
        reg = obj.get("regularity", {})
        return cls(dim, body, tuple(float(b) for b in obj.get("breakpoints", [])),
                   reg.get("class", "LC"), int(reg.get("p", 1)))

    def __str__(self):
        return "; ".join(str(c) for c in self.body)


def evaluate(field: VectorField, t: float, x, u) -> np.ndarray:
    """``f(t, x, u)`` for a single point; returns a length-N array."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x.shape != (field.dim,) or u.shape != (field.dim,):
        raise ValueError(f"expected points in R^{field.dim}")
    return field.eval(float(t), x, u)


def translate(field: VectorField, by: float) -> VectorField:
    """Time translate ``s -> f(s + by, x, u)``."""
    by = float(by)
    if by == 0.0:
        return field
    body = []
    for c in field.body:
        if isinstance(c, ex.Shift):
            total = c.by + by
            body.append(c.body if total == 0.0 else ex.Shift(total, c.body))
        else:
            body.append(ex.Shift(by, c))
    return VectorField(field.dim, tuple(body), tuple(b - by for b in field.declared),
                       field.regularity, field.p)


def difference(f: VectorField, g: VectorField) -> VectorField:
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")
    body = tuple(ex.Op("sub", (a, b)) for a, b in zip(f.body, g.body))
    declared = tuple(sorted(set(f.breakpoints) | set(g.breakpoints)))
    return VectorField(f.dim, body, declared, f.regularity, max(f.p, g.p))


def scale(f: VectorField, c: float) -> VectorField:
    body = tuple(ex.Op("mul", (ex.Const(float(c)), a)) for a in f.body)
    return VectorField(f.dim, body, f.declared, f.regularity, f.p)


# ---------------------------------------------------------------------------
# moduli of continuity


class Modulus:
    """Nondecreasing continuous ``theta`` with ``theta(0) = 0``."""

    def __call__(self, s):
        raise NotImplementedError

    def abscissae(self, span: float = 4.0) -> np.ndarray:
        """Sample points used when the modulus must be tabulated."""
        return np.unique(np.concatenate([np.linspace(0.0, span, 1025),
                                         np.geomspace(1e-8, span, 200)]))


@dataclass(frozen=True)
class LinearModulus(Modulus):
    c: float

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("slope must be nonnegative")

    def __call__(self, s):
        return self.c * np.asarray(s, dtype=float)


@dataclass(frozen=True)
class PowerModulus(Modulus):
    """``min(c * s**alpha, cap)``."""

    c: float
    alpha: float
    cap: float = np.inf

    def __post_init__(self):
        if self.c < 0 or self.alpha <= 0 or self.cap < 0:
            raise ValueError("invalid power modulus parameters")

    def __call__(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        return np.minimum(self.c * s ** self.alpha, self.cap)


@dataclass(frozen=True, eq=False)
class TableModulus(Modulus):
    """Linear interpolation of a nondecreasing table; extended past the last
    sample with the slope of the final segment."""

    s: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if s.ndim != 1 or s.shape != v.shape or len(s) < 2:
            raise ValueError("table needs matching 1-d arrays with at least two samples")
        if s[0] != 0.0 or v[0] != 0.0:
            raise ValueError("table must start at (0, 0)")
        if np.any(np.diff(s) <= 0):
            raise ValueError("table abscissae must be strictly increasing")
        if np.any(np.diff(v) < 0) or not np.all(np.isfinite(v)):
            raise ValueError("table values must be finite and nondecreasing")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "v", v)

    def __call__(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        out = np.interp(s, self.s, self.v)
        slope = (self.v[-1] - self.v[-2]) / (self.s[-1] - self.s[-2])
        return np.where(s > self.s[-1], self.v[-1] + slope * (s - self.s[-1]), out)

    def abscissae(self, span: float = 4.0) -> np.ndarray:
        return self.s

    def __eq__(self, other):
        return (isinstance(other, TableModulus) and np.array_equal(self.s, other.s)
                and np.array_equal(self.v, other.v))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MaxModulus(Modulus):
    """Exact pointwise maximum of moduli."""

    parts: tuple

    def __call__(self, s):
        return np.max([m(s) for m in self.parts], axis=0)

    def abscissae(self, span: float = 4.0) -> np.ndarray:
        return np.unique(np.concatenate([m.abscissae(span) for m in self.parts]))


def merge_moduli(a: Modulus, b: Modulus) -> Modulus:
    """Pointwise maximum of two moduli."""
    if a == b:
        return a
    parts = [m for x in (a, b) for m in (x.parts if isinstance(x, MaxModulus) else (x,))]
    return MaxModulus(tuple(parts))


def shared_modulus(paths: Sequence["SampledPath"], steps: int | None = None) -> TableModulus:
    """Smallest common modulus of a family of paths, sampled at multiples of a
    uniform step: ``theta(h) = max_paths sup_{|t-s|<=h} |x(t) - x(s)|``."""
    if not paths:
        raise ValueError("shared_modulus needs at least one path")
    lo, hi = paths[0].grid[0], paths[0].grid[-1]
    for p in paths:
        if abs(p.grid[0] - lo) > 1e-12 or abs(p.grid[-1] - hi) > 1e-12:
            raise ValueError("paths must share a common interval")
    if steps is None:
        finest = min(float(np.min(np.diff(p.grid))) if len(p.grid) > 1 else hi - lo for p in paths)
        steps = int(min(max(np.ceil((hi - lo) / max(finest, 1e-15) - 1e-9), 1), 4096))
    steps = max(int(steps), 1)
    tt = np.linspace(lo, hi, steps + 1)
    unit = (hi - lo) / steps
    aligned = all(np.allclose(np.rint((p.grid - lo) / unit) * unit + lo, p.grid, rtol=0, atol=1e-9 * unit)
                  for p in paths)
    if not aligned:
        return TableModulus(tt - lo, _node_pair_bound(paths, tt, lo))
    best = np.zeros(steps + 1)
    for p in paths:
        x = p(tt)
        for k in range(1, steps + 1):
            d = np.linalg.norm(x[k:] - x[:-k], axis=-1)
            best[k] = max(best[k], float(d.max()))
    best = np.maximum.accumulate(best)
    return TableModulus(tt - lo, best)


def _node_pair_bound(paths, tt, lo) -> np.ndarray:
    """Upper bound for unaligned nodes: any ``|t - s| <= h`` is bracketed by
    nodes ``a, b`` with ``|a - b| <= h + 2 g`` (``g`` the largest gap)."""
    pts = np.unique(np.concatenate([tt] + [p.grid for p in paths]))
    g = float(np.max(np.diff(pts)))
    s = tt - lo
    best = np.zeros(len(s))
    for p in paths:
        x = p(pts)
        for i in range(len(pts) - 1):
            dt = pts[i + 1:] - pts[i]
            dv = np.maximum.accumulate(np.linalg.norm(x[i + 1:] - x[i], axis=-1))
            k = np.searchsorted(dt, s[1:] + 2 * g, side="right")
            hit = k > 0
            best[1:][hit] = np.maximum(best[1:][hit], dv[k[hit] - 1])
    return np.maximum.accumulate(best)


class _Free:
    """Marker for an unconstrained path class, all of C(I, B_j)."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "FREE"


FREE = _Free()


def modulus_from_json(obj) -> Modulus:
    if isinstance(obj, Modulus):
        return obj
    kind = obj.get("type")
    if kind == "linear":
        return LinearModulus(float(obj["c"]))
    if kind == "power":
        return PowerModulus(float(obj["c"]), float(obj["alpha"]), float(obj.get("cap", np.inf)))
    if kind == "table":
        return TableModulus(np.asarray(obj["s"], float), np.asarray(obj["v"], float))
    if kind == "max":
        return MaxModulus(tuple(modulus_from_json(x) for x in obj["parts"]))
    raise ValueError(f"unknown modulus type {kind!r}")


def modulus_to_json(m: Modulus) -> dict:
    if isinstance(m, LinearModulus):
        return {"type": "linear", "c": m.c}
    if isinstance(m, PowerModulus):
        return {"type": "power", "c": m.c, "alpha": m.alpha,
                **({} if np.isinf(m.cap) else {"cap": m.cap})}
    if isinstance(m, TableModulus):
        return {"type": "table", "s": m.s.tolist(), "v": m.v.tolist()}
    if isinstance(m, MaxModulus):
        return {"type": "max", "parts": [modulus_to_json(x) for x in m.parts]}
    raise TypeError(type(m))


@dataclass
class ModulusSet:
    """Family ``theta^I_j`` keyed by (interval, radius index).

    ``uniform`` backs every lookup that has no explicit entry; it models the
    interval-independent sets built from a single field's m-bounds.
    """

    entries: dict = field(default_factory=dict)
    uniform: Modulus | None = None
    by_radius: dict = field(default_factory=dict)

    @classmethod
    def single(cls, m: Modulus) -> "ModulusSet":
        return cls(uniform=m)

    def lookup(self, interval: RationalInterval, j: float) -> Modulus:
        key = (interval, float(j))
        if key in self.entries:
            return self.entries[key]
        if self.by_radius:
            above = [r for r in self.by_radius if r >= float(j) - 1e-12]
            if above:
                return self.by_radius[min(above)]
        if self.uniform is not None:
            return self.uniform
        raise KeyError(f"missing modulus entry for I={interval}, j={j}")

    def violations(self, s_grid: Iterable[float] | None = None, tol: float = 1e-12) -> list:
        """Pairs of keys breaking the partial order on ``s_grid``."""
        s = np.linspace(0.0, 4.0, 100) if s_grid is None else np.asarray(list(s_grid), float)
        keys = list(self.entries)
        bad = []
        for k1 in keys:
            for k2 in keys:
                if k1 == k2:
                    continue
                (i1, j1), (i2, j2) = k1, k2
                if i2.contains(i1) and j1 <= j2:
                    if np.any(self.entries[k1](s) > self.entries[k2](s) + tol):
                        bad.append((k1, k2))
        radii = sorted(self.by_radius)
        for a, b in zip(radii, radii[1:]):
            if np.any(self.by_radius[a](s) > self.by_radius[b](s) + tol):
                bad.append((a, b))
        return bad


def as_modulus_set(m) -> ModulusSet:
    if m is None or isinstance(m, ModulusSet):
        return m
    if isinstance(m, Modulus):
        return ModulusSet.single(m)
    raise TypeError(f"expected a Modulus or ModulusSet, got {type(m).__name__}")


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=False)
class SampledPath:
    """Piecewise linear path through ``values[k]`` at ``grid[k]``."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if g.ndim != 1 or len(g) == 0 or v.shape[0] != len(g):
            raise ValueError("grid and values must be nonempty and aligned")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def span(self) -> tuple:
        return float(self.grid[0]), float(self.grid[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        cols = [np.interp(t, self.grid, self.values[:, k]) for k in range(self.dim)]
        return np.stack(cols, axis=-1)

    @classmethod
    def from_function(cls, fn, lo: float, hi: float, n: int) -> "SampledPath":
        g = np.linspace(lo, hi, n + 1)
        return cls(g, np.asarray([np.atleast_1d(fn(t)) for t in g], float))

    def resample(self, grid) -> "SampledPath":
        return SampledPath(np.asarray(grid, float), self(grid))

    def shift(self, by: float) -> "SampledPath":
        return SampledPath(self.grid + by, self.values)

    def sup_distance(self, other: "SampledPath") -> float:
        """Sup-norm distance of the interpolants on the common span."""
        lo = max(self.grid[0], other.grid[0])
        hi = min(self.grid[-1], other.grid[-1])
        g = np.union1d(self.grid, other.grid)
        g = g[(g >= lo - 1e-12) & (g <= hi + 1e-12)]
        return float(np.max(np.linalg.norm(self(g) - other(g), axis=-1)))


@dataclass(frozen=True)
class PathClass:
    """B_j-valued paths on ``interval``, optionally sharing ``modulus``."""

    interval: RationalInterval
    radius: float
    modulus: object = FREE

    def contains(self, path: SampledPath, tol: float = 1e-12, all_pairs: bool = False) -> bool:
        if abs(path.grid[0] - self.interval.lo) > tol or abs(path.grid[-1] - self.interval.hi) > tol:
            return False
        if np.any(np.linalg.norm(path.values, axis=1) > self.radius + tol):
            return False
        if self.modulus is FREE:
            return True
        g, v = path.grid, path.values
        if all_pairs:
            dt = np.abs(g[:, None] - g[None, :])
            dv = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)
            return bool(np.all(dv <= self.modulus(dt) + tol))
        dv = np.linalg.norm(np.diff(v, axis=0), axis=1)
        return bool(np.all(dv <= self.modulus(np.diff(g)) + tol))


