"""Strong and weak integral seminorms over modulus-constrained path classes.

Every supremum over a path class is relaxed to a layered-graph problem: time
is cut into cells (grid nodes at multiples of ``dt`` plus the field's
breakpoints), a path takes one lattice value per cell midpoint, consecutive
values must satisfy the modulus constraint, and the integral is the midpoint
rule.  Spatial lattices are ``dx * Z^N`` intersected with balls.

Balls: the classic kinds (TB, TD, TTheta, sigma...) work in R^{2N} with the
Euclidean ball ``|(x, u)| <= j``; the hybrid kinds put ``x`` and ``u`` in
separate balls ``B_j`` of R^N.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dp import (DPProblem, fold_sum, lattice_transitions, product_transitions,
                 sup_path_integral)
from .model import (Modulus, ModulusSet, RationalInterval, SampledPath, VectorField,
                    as_modulus_set, difference)
from .quadrature import MidpointGrid, ball_lattice, midpoint_grid

STRONG = ("TB", "TD", "TTheta", "TThetaD", "TThetaThetaHat", "TThetaB")
WEAK = ("sigmaD", "sigmaTheta", "sigmaThetaD", "sigmaThetaThetaHat")
KINDS = STRONG + WEAK
NEEDS_POINT = ("TD", "sigmaD", "TThetaD", "sigmaThetaD")
NEEDS_THETA = ("TTheta", "sigmaTheta", "TThetaD", "sigmaThetaD", "TThetaThetaHat",
               "sigmaThetaThetaHat", "TThetaB")
NEEDS_THETA_HAT = ("TThetaThetaHat", "sigmaThetaThetaHat")
ALTERNATIVE = ("TThetaThetaHat", "sigmaThetaThetaHat", "TThetaB")
_SLACK = 1 + 1e-9


class SeminormError(ValueError):
    pass


@dataclass(frozen=True)
class Resolution:
    """Time step ``dt`` of the quadrature grid and lattice step ``dx``.

    Paths can only move between lattice values when ``theta(dt) >= dx``.
    """

    dt: float = 0.05
    dx: float = 0.25


@dataclass(frozen=True, eq=False)
class SeminormIndex:
    kind: str
    interval: RationalInterval
    j: float = 1.0
    p: int = 1
    x_point: tuple | None = None
    theta: ModulusSet | Modulus | None = None
    theta_hat: ModulusSet | Modulus | None = None
    directions: int = 16
    window: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SeminormError(f"unknown seminorm kind {self.kind!r}")
        object.__setattr__(self, "interval", RationalInterval.from_json(self.interval))
        object.__setattr__(self, "theta", as_modulus_set(self.theta))
        object.__setattr__(self, "theta_hat", as_modulus_set(self.theta_hat))
        if self.kind in NEEDS_POINT and self.x_point is None:
            raise SeminormError(f"{self.kind} needs a point of D")
        if self.x_point is not None:
            object.__setattr__(self, "x_point", tuple(float(v) for v in np.atleast_1d(self.x_point)))
        if self.kind in NEEDS_THETA and self.theta is None:
            raise SeminormError(f"{self.kind} needs a modulus set")
        if self.kind in NEEDS_THETA_HAT and self.theta_hat is None:
            raise SeminormError(f"{self.kind} needs a second modulus set")
        if self.kind in WEAK and self.p != 1:
            raise SeminormError(f"weak seminorm {self.kind} is only defined for p = 1")
        if self.p < 1:
            raise SeminormError("p must be >= 1")
        if self.j < 0:
            raise SeminormError("radius must be nonnegative")

    @property
    def weak(self) -> bool:
        return self.kind in WEAK

    def describe(self) -> dict:
        return {"kind": self.kind, "I": str(self.interval), "j": self.j, "p": self.p,
                "x_point": list(self.x_point) if self.x_point is not None else None}


@dataclass(frozen=True, eq=False)
class SeminormResult:
    value: float
    index: SeminormIndex
    x_path: SampledPath | None = None
    u_path: SampledPath | None = None


# ---------------------------------------------------------------------------
# tables of field values


class _Table:
    """Field values on (cell midpoints) x (x-lattice) x (u-lattice)."""

    def __init__(self, f: VectorField, grid: MidpointGrid, xk, xp, uk, up, weights):
        self.f, self.grid = f, grid
        self.xk, self.xp, self.uk, self.up = xk, xp, uk, up
        self.widths = weights
        t = grid.nodes
        self.values = f.eval(t[:, None, None], xp[None, :, None, :], up[None, None, :, :])

    @property
    def N(self) -> int:
        return self.f.dim


def _time_grid(f: VectorField, idx: SeminormIndex, res: Resolution):
    I = idx.interval
    extra = list(f.breakpoints)
    if idx.window is not None:
        extra += [float(w) for w in idx.window]
    grid = midpoint_grid(I.lo, I.hi, res.dt, extra)
    widths = grid.widths.copy()
    if idx.window is not None:
        lo, hi = (float(w) for w in idx.window)
        widths[(grid.nodes < lo) | (grid.nodes > hi)] = 0.0
    return grid, widths


def _point_lattice(point, step, dim):
    pt = np.asarray(point, dtype=float).reshape(1, dim)
    k = np.rint(pt / step)
    ks = k.astype(np.int64) if np.allclose(k * step, pt, rtol=0, atol=1e-12) else np.zeros((1, dim), np.int64)
    return ks, pt


def _magnitude(v: np.ndarray, p: int) -> np.ndarray:
    """``|v|^p`` with the trailing axis the component axis."""
    m = np.abs(v[..., 0]) if v.shape[-1] == 1 else np.linalg.norm(v, axis=-1)
    return m if p == 1 else m ** p


def _directions(N: int, count: int) -> np.ndarray:
    if N == 1:
        return np.array([[1.0]])
    if N == 2:
        ang = 2 * np.pi * np.arange(count) / count
        d = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        rng = np.random.default_rng(0)
        d = rng.normal(size=(max(count // 2, 1), N))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        d = np.concatenate([d, -d])
    return d


def _c2(theta: Modulus, gaps: np.ndarray, dx: float) -> np.ndarray:
    return (np.asarray(theta(gaps), dtype=float) / dx) ** 2 * _SLACK


def _transitions(ks, thetas, gaps, dx, split=None):
    """Per-gap CSR list.  ``thetas`` is one modulus (joint constraint) or a
    pair (product constraint on the first ``split`` and remaining coords)."""
    cache: dict = {}
    out = []
    if split is None:
        c2s = _c2(thetas, gaps, dx)
        for c in c2s:
            key = float(c)
            if key not in cache:
                cache[key] = lattice_transitions(ks, key)
            out.append(cache[key])
        return out
    kx, ku = ks
    ca, cb = _c2(thetas[0], gaps, dx), _c2(thetas[1], gaps, dx)
    tx, tu = {}, {}
    for a, b in zip(ca, cb):
        key = (float(a), float(b))
        if key not in cache:
            if key[0] not in tx:
                tx[key[0]] = lattice_transitions(kx, key[0])
            if key[1] not in tu:
                tu[key[1]] = lattice_transitions(ku, key[1])
            cache[key] = product_transitions(tx[key[0]], tu[key[1]])
        out.append(cache[key])
    return out


def _solve(weights: np.ndarray, transitions: list, weak: bool):
    """Max of the fold (strong) or max |fold| over both signs (weak, one
    direction)."""
    layers = list(weights)
    if not weak:
        r = sup_path_integral(DPProblem(layers, transitions, "max"))
        return r.value, r.path
    hi = sup_path_integral(DPProblem(layers, transitions, "max"))
    lo = sup_path_integral(DPProblem(layers, transitions, "min"))
    if abs(hi.value) >= abs(lo.value):
        return abs(hi.value), hi.path
    return abs(lo.value), lo.path


def _weak_over_directions(vals, widths, transitions, N, count):
    """Signed DP per direction; returns best value and path."""
    best, best_path = -np.inf, None
    for d in _directions(N, count):
        proj = vals @ d
        w = widths.reshape((-1,) + (1,) * (proj.ndim - 1)) * proj
        if N == 1:
            v, path = _solve(w, transitions, True)
        else:
            r = sup_path_integral(DPProblem(list(w), transitions, "max"))
            v, path = r.value, r.path
        if v > best:
            best, best_path = v, path
    return max(best, 0.0), best_path


def _reduce(table: _Table, idx: SeminormIndex, res: Resolution, sel: dict, alternative: bool):
    """Compute one seminorm from ``table`` restricted per ``sel``.

    ``sel`` holds index arrays ``x`` and ``u`` into the table lattices (and
    ``joint`` for joint kinds).
    """
    kind, N, p = idx.kind, table.N, idx.p
    grid, widths = table.grid, table.widths
    nodes = grid.nodes
    gaps = np.diff(nodes)
    wcol = widths[:, None]
    V = table.values
    I, j = idx.interval, idx.j
    x_path = u_path = None

    if kind in ("TD", "sigmaD", "TB"):
        if kind == "TB":
            xs, us = sel["x"], sel["u"]
            sub = V[:, xs][:, :, us]
            mag = _magnitude(sub, p)
            mask = sel["joint_mask"]
            mag = np.where(mask[None], mag, -np.inf).reshape(len(nodes), -1)
            value = fold_sum(widths * mag.max(axis=1))
        else:
            v = V[:, sel["x"][0], sel["u"][0]]
            if kind == "TD":
                value = fold_sum(widths * _magnitude(v, p))
            else:
                sums = [fold_sum(widths * v[:, c]) for c in range(N)]
                value = abs(sums[0]) if N == 1 else float(np.linalg.norm(sums))
        return (value ** (1.0 / p) if kind != "sigmaD" else value), None, None

    theta = idx.theta.lookup(I, j)
    if kind in ("TThetaD", "sigmaThetaD"):
        xs, u0 = sel["x"], sel["u"][0]
        sub = V[:, xs, u0]
        trans = _transitions(table.xk[xs], theta, gaps, res.dx)
        if kind == "TThetaD":
            value, path = _solve(wcol * _magnitude(sub, p), trans, False)
            value = value ** (1.0 / p)
        else:
            value, path = _weak_over_directions(sub, widths, trans, N, idx.directions)
        x_path = SampledPath(nodes, table.xp[xs][list(path)])
        return value, x_path, None

    if kind in ("TTheta", "sigmaTheta"):
        pairs = sel["joint"]
        sub = V[:, pairs[:, 0], pairs[:, 1]]
        ks = np.concatenate([table.xk[pairs[:, 0]], table.uk[pairs[:, 1]]], axis=1)
        trans = _transitions(ks, theta, gaps, res.dx)
        if kind == "TTheta":
            value, path = _solve(wcol * _magnitude(sub, p), trans, False)
            value = value ** (1.0 / p)
        else:
            value, path = _weak_over_directions(sub, widths, trans, N, idx.directions)
        chosen = pairs[list(path)]
        x_path = SampledPath(nodes, table.xp[chosen[:, 0]])
        u_path = SampledPath(nodes, table.up[chosen[:, 1]])
        return value, x_path, u_path

    xs, us = sel["x"], sel["u"]
    if kind == "TThetaB":
        sub = V[:, xs][:, :, us]
        w = wcol * _magnitude(sub, p).max(axis=2)
        trans = _transitions(table.xk[xs], theta, gaps, res.dx)
        value, path = _solve(w, trans, False)
        x_path = SampledPath(nodes, table.xp[xs][list(path)])
        return value ** (1.0 / p), x_path, None

    # TThetaThetaHat / sigmaThetaThetaHat
    u_interval = I if alternative else I.shift(-1)
    theta_hat = idx.theta_hat.lookup(u_interval, j)
    sub = V[:, xs][:, :, us].reshape(len(nodes), len(xs) * len(us), N)
    trans = _transitions((table.xk[xs], table.uk[us]), (theta, theta_hat), gaps, res.dx, split=True)
    if kind == "TThetaThetaHat":
        value, path = _solve(wcol * _magnitude(sub, p), trans, False)
        value = value ** (1.0 / p)
    else:
        value, path = _weak_over_directions(sub, widths, trans, N, idx.directions)
    path = np.asarray(path)
    x_path = SampledPath(nodes, table.xp[xs][path // len(us)])
    u_times = nodes if alternative else nodes - 1.0
    u_path = SampledPath(u_times, table.up[us][path % len(us)])
    return value, x_path, u_path


def _standalone(f: VectorField, idx: SeminormIndex, res: Resolution, alternative: bool) -> SeminormResult:
    N, j, kind = f.dim, idx.j, idx.kind
    if idx.x_point is not None:
        want = 2 * N if kind in ("TD", "sigmaD") else N
        if len(idx.x_point) != want:
            raise SeminormError(f"{kind} expects a point in R^{want}, got {len(idx.x_point)} coordinates")
    grid, widths = _time_grid(f, idx, res)
    if kind in ("TD", "sigmaD"):
        pt = np.asarray(idx.x_point)
        xk, xp = _point_lattice(pt[:N], res.dx, N)
        uk, up = _point_lattice(pt[N:], res.dx, N)
    elif kind in ("TThetaD", "sigmaThetaD"):
        xk, xp = ball_lattice(j, res.dx, N)
        uk, up = _point_lattice(idx.x_point, res.dx, N)
    else:
        xk, xp = ball_lattice(j, res.dx, N)
        uk, up = xk, xp
    table = _Table(f, grid, xk, xp, uk, up, widths)
    sel = {"x": np.arange(len(xk)), "u": np.arange(len(uk))}
    if kind in ("TB", "TTheta", "sigmaTheta"):
        k2 = np.sum(xk.astype(float) ** 2, axis=1)[:, None] + np.sum(uk.astype(float) ** 2, axis=1)[None, :]
        mask = k2 <= (j / res.dx) ** 2 * _SLACK
        sel["joint_mask"] = mask
        sel["joint"] = np.argwhere(mask)
    value, xpth, upth = _reduce(table, idx, res, sel, alternative)
    return SeminormResult(float(value), idx, xpth, upth)


def seminorm_detail(f: VectorField, idx: SeminormIndex, res: Resolution = Resolution()) -> SeminormResult:
    return _standalone(f, idx, res, alternative=False)


def seminorm(f: VectorField, idx: SeminormIndex, res: Resolution = Resolution()) -> float:
    """Value of the seminorm ``idx`` at ``f`` (a lower bound of the continuum
    supremum for path-class kinds)."""
    return seminorm_detail(f, idx, res).value


def seminorm_alternative(f: VectorField, idx: SeminormIndex, res: Resolution = Resolution()) -> float:
    """Same seminorm with the delayed path on ``I`` itself: ``f(t, x(t), u(t))``."""
    if idx.kind not in ALTERNATIVE:
        raise SeminormError(f"no alternative form for {idx.kind}")
    return _standalone(f, idx, res, alternative=True).value


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True, eq=False)
class MetricConfig:
    """Fixed enumeration of seminorms: intervals ``[-r, r]`` for r = 1..R
    (outer), radii j = 1..J, then points of D in the given order (inner)."""

    kind: str
    R: int = 1
    J: int = 1
    D: tuple = ()
    theta: ModulusSet | Modulus | None = None
    theta_hat: ModulusSet | Modulus | None = None
    p: int = 1
    K_max: int | None = None
    directions: int = 16

    def indices(self) -> list[SeminormIndex]:
        out = []
        for r in range(1, self.R + 1):
            I = RationalInterval.symmetric(r)
            if self.kind in ("TD", "sigmaD"):
                for x in self.D:
                    out.append(SeminormIndex(self.kind, I, 1.0, self.p, x, directions=self.directions))
                continue
            for j in range(1, self.J + 1):
                pts = self.D if self.kind in NEEDS_POINT else (None,)
                if self.kind in NEEDS_POINT and not pts:
                    raise SeminormError(f"metric of kind {self.kind} needs D points")
                for x in pts:
                    out.append(SeminormIndex(self.kind, I, float(j), self.p, x, self.theta,
                                             self.theta_hat, self.directions))
        if self.K_max is not None:
            out = out[:self.K_max]
        return out


def metric_terms(f: VectorField, g: VectorField, config: MetricConfig,
                 res: Resolution = Resolution()) -> list[float]:
    h = difference(f, g)
    return [seminorm(h, idx, res) for idx in config.indices()]


def metric(f: VectorField, g: VectorField, config: MetricConfig, res: Resolution = Resolution()) -> float:
    """Truncated Frechet combination ``sum_k 2^-k p_k / (1 + p_k)`` of ``f - g``."""
    terms = metric_terms(f, g, config, res)
    return float(sum(2.0 ** -(k + 1) * v / (1.0 + v) for k, v in enumerate(terms)))


# ---------------------------------------------------------------------------
# ordering chain


@dataclass
class OrderingReport:
    values: dict = field(default_factory=dict)
    relations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r[4] for r in self.relations)

    def to_json(self) -> dict:
        return {"values": self.values,
                "relations": [{"lhs": a, "rhs": b, "lhs_value": va, "rhs_value": vb, "holds": ok}
                              for a, b, va, vb, ok in self.relations],
                "ok": self.ok}


def ordering_check(f: VectorField, interval, j: float, p: int, theta, theta_hat,
                   D_points: Sequence, res: Resolution = Resolution(), s_check=None) -> OrderingReport:
    """Evaluate both chains of topologies on one shared table of field values.

    Matched indices make the feasible path sets nest exactly on the grid:
    TD at (x0, u0) with |x0|, |u0| <= j; TThetaD with x-ball radius j;
    TTheta with joint radius sqrt(2) j; the hybrid kinds TThetaTheta,
    TThetaThetaHat, TThetaB with component radius sqrt(2) j; TB with joint
    radius 2 j.  Every D point must lie on the ``dx`` lattice.
    """
    N = f.dim
    I = RationalInterval.from_json(interval)
    theta, theta_hat = as_modulus_set(theta), as_modulus_set(theta_hat)
    s = np.linspace(0.0, max(I.length, 1.0), 101) if s_check is None else np.asarray(s_check)
    r_mid = float(np.sqrt(2.0) * j)
    for key_I, radius in ((I, j), (I, r_mid), (I.shift(-1), r_mid)):
        th = theta.lookup(I, radius)
        tk = theta_hat.lookup(key_I, radius)
        if np.any(th(s) > tk(s) + 1e-12):
            raise SeminormError("ordering_check requires theta <= theta_hat pointwise")
    for pt in D_points:
        pt = np.asarray(pt, float)
        if pt.shape != (2 * N,):
            raise SeminormError(f"D points must lie in R^{2 * N}")
        if np.linalg.norm(pt[:N]) > j + 1e-12 or np.linalg.norm(pt[N:]) > j + 1e-12:
            raise SeminormError("D points must satisfy |x0|, |u0| <= j")
        if not np.allclose(np.rint(pt / res.dx) * res.dx, pt, rtol=0, atol=1e-12):
            raise SeminormError("D points must lie on the spatial lattice")

    base = SeminormIndex("TB", I, 2 * j, p)
    grid, widths = _time_grid(f, base, res)
    ks, pts = ball_lattice(2 * j, res.dx, N)
    table = _Table(f, grid, ks, pts, ks, pts, widths)
    k2 = np.sum(ks.astype(float) ** 2, axis=1)

    def ball(radius):
        return np.flatnonzero(k2 <= (radius / res.dx) ** 2 * _SLACK)

    def joint(radius):
        mask = (k2[:, None] + k2[None, :]) <= (radius / res.dx) ** 2 * _SLACK
        return mask, np.argwhere(mask)

    def locate(vec):
        k = np.rint(np.asarray(vec) / res.dx).astype(np.int64)
        return int(np.flatnonzero(np.all(ks == k, axis=1))[0])

    all_idx = np.arange(len(ks))
    jm, jpairs = joint(r_mid)
    jb, _ = joint(2 * j)
    x_mid = ball(r_mid)

    def run(kind, radius, sel, pp=p, point=None):
        idx = SeminormIndex(kind, I, radius, pp, point, theta, theta_hat)
        return float(_reduce(table, idx, res, sel, alternative=False)[0])

    rep = OrderingReport()
    strong_names = ["TD", "TThetaD", "TTheta", "TThetaTheta", "TThetaThetaHat", "TThetaB", "TB"]
    weak_names = ["sigmaD", "sigmaThetaD", "sigmaTheta", "sigmaThetaTheta", "sigmaThetaThetaHat",
                  "TThetaThetaHat[p=1]"]
    for n_pt, pt in enumerate(D_points):
        pt = np.asarray(pt, float)
        ix, iu = locate(pt[:N]), locate(pt[N:])
        v = {}
        pointsel = {"x": np.array([ix]), "u": np.array([iu])}
        v["TD"] = run("TD", j, pointsel, point=pt)
        v["TThetaD"] = run("TThetaD", j, {"x": ball(j), "u": np.array([iu])}, point=pt[N:])
        v["TTheta"] = run("TTheta", r_mid, {"joint": jpairs})
        same = SeminormIndex("TThetaThetaHat", I, r_mid, p, None, theta, theta)
        v["TThetaTheta"] = float(_reduce(table, same, res, {"x": x_mid, "u": x_mid}, False)[0])
        v["TThetaThetaHat"] = run("TThetaThetaHat", r_mid, {"x": x_mid, "u": x_mid})
        v["TThetaB"] = run("TThetaB", r_mid, {"x": x_mid, "u": x_mid})
        v["TB"] = run("TB", 2 * j, {"x": all_idx, "u": all_idx, "joint_mask": jb})
        v["sigmaD"] = run("sigmaD", j, pointsel, pp=1, point=pt)
        v["sigmaThetaD"] = run("sigmaThetaD", j, {"x": ball(j), "u": np.array([iu])}, pp=1, point=pt[N:])
        v["sigmaTheta"] = run("sigmaTheta", r_mid, {"joint": jpairs}, pp=1)
        same_w = SeminormIndex("sigmaThetaThetaHat", I, r_mid, 1, None, theta, theta)
        v["sigmaThetaTheta"] = float(_reduce(table, same_w, res, {"x": x_mid, "u": x_mid}, False)[0])
        v["sigmaThetaThetaHat"] = run("sigmaThetaThetaHat", r_mid, {"x": x_mid, "u": x_mid}, pp=1)
        v["TThetaThetaHat[p=1]"] = (v["TThetaThetaHat"] if p == 1 else
                                    run("TThetaThetaHat", r_mid, {"x": x_mid, "u": x_mid}, pp=1))
        v["TD[p=1]"] = v["TD"] if p == 1 else run("TD", j, pointsel, pp=1, point=pt)
        tag = f"@{n_pt}"
        rep.values.update({k + tag: val for k, val in v.items()})
        chains = [strong_names, weak_names, ["sigmaD", "TD[p=1]"]]
        for chain in chains:
            for a, b in zip(chain, chain[1:]):
                rep.relations.append((a + tag, b + tag, v[a], v[b], bool(v[a] <= v[b])))
    return rep
