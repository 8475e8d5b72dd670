"""Method of steps for ``x'(t) = f(t, x(t), x(t - 1))`` with measurable-in-t fields.

Each unit interval reduces to an ODE ``g(t, x) = f(t, x, history(t - 1))``.
The ODE is integrated in integral form: on a step ``[t0, t1]`` the new value
solves ``y = x0 + int g(s, xhat(s)) ds`` with ``xhat`` the chord from ``x0`` to
``y`` and the integral a composite midpoint rule with ``sub_steps`` cells.  The
implicit equation is solved by fixed-point iteration; a step that does not
converge is bisected.  Breakpoints of ``f`` and kinks of the history are grid
nodes, so midpoints never sit on a discontinuity.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import PowerModulus, SampledPath, VectorField
from .quadrature import time_edges

__all__ = ["InitialHistory", "SolverParams", "Trajectory", "ReducedField", "ODEResult",
           "PicardError", "step_reduce", "integrate_caratheodory_ode", "solve", "segment",
           "c1p_norm", "c1p_modulus_tau", "trajectory_difference"]


class PicardError(RuntimeError):
    pass


class UnsupportedExponentError(ValueError):
    pass


@dataclass(frozen=True)
class SolverParams:
    h: float = 1e-3
    sub_steps: int = 2
    picard_tol: float = 1e-12
    picard_max: int = 50
    escape_radius: float = 1e6
    max_bisect: int = 30
    residual_factor: float = 5.0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.sub_steps < 1 or self.picard_max < 1:
            raise ValueError("sub_steps and picard_max must be positive")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class InitialHistory:
    """Initial segment on ``[-1, 0]`` with optional derivative samples."""

    path: SampledPath
    derivative: SampledPath | None = None

    def __post_init__(self):
        lo, hi = self.path.span
        if abs(lo + 1.0) > 1e-12 or abs(hi) > 1e-12:
            raise ValueError("initial history must span exactly [-1, 0]")
        if self.derivative is not None and self.derivative.dim != self.path.dim:
            raise ValueError("derivative dimension mismatch")

    @property
    def dim(self) -> int:
        return self.path.dim

    @classmethod
    def constant(cls, value, n: int = 1) -> "InitialHistory":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        g = np.linspace(-1.0, 0.0, n + 1)
        vals = np.broadcast_to(v, (len(g), len(v)))
        return cls(SampledPath(g, vals), SampledPath(g, np.zeros_like(vals)))

    @classmethod
    def from_function(cls, fn: Callable, n: int = 1000, derivative: Callable | None = None) -> "InitialHistory":
        g = np.linspace(-1.0, 0.0, n + 1)
        vals = np.asarray([np.atleast_1d(fn(t)) for t in g], float)
        d = None
        if derivative is not None:
            d = SampledPath(g, np.asarray([np.atleast_1d(derivative(t)) for t in g], float))
        return cls(SampledPath(g, vals), d)

    def consistency_error(self) -> float:
        """``max |int_{-1}^t phi' - (phi(t) - phi(-1))|`` by trapezoid sums."""
        if self.derivative is None:
            return 0.0
        g = np.union1d(self.path.grid, self.derivative.grid)
        d = self.derivative(g)
        Q = np.concatenate([np.zeros((1, d.shape[1])),
                            np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(g)[:, None], axis=0)])
        return float(np.max(np.abs(self.path(g) - self.path(g[:1]) - Q)))


@dataclass(frozen=True, eq=False)
class ReducedField:
    """``g(t, x) = f(t, x, history(t - 1))`` on ``[a, a + 1]``."""

    f: VectorField
    history: SampledPath
    a: float

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def breakpoints(self) -> tuple:
        hist = self.history.grid + 1.0
        pts = np.concatenate([np.asarray(self.f.breakpoints, float), hist])
        b = self.a + 1.0
        return tuple(np.unique(pts[(pts > self.a) & (pts < b)]))

    def delayed(self, t) -> np.ndarray:
        return self.history(np.asarray(t, float) - 1.0)

    def __call__(self, t, x, u=None) -> np.ndarray:
        """``t`` of shape (m,), ``x`` of shape (m, N); ``u`` optionally
        precomputed history values."""
        t = np.asarray(t, float)
        U = self.delayed(t) if u is None else u
        return self.f.eval(t, np.asarray(x, float), U)


def step_reduce(f: VectorField, history: SampledPath) -> ReducedField:
    """Freeze the delayed argument: history on ``[k - 1, k]`` gives ``g`` on ``[k, k + 1]``."""
    lo, hi = history.span
    if abs(hi - lo - 1.0) > 1e-9:
        raise ValueError(f"history must span a full unit interval, got [{lo}, {hi}]")
    if history.dim != f.dim:
        raise ValueError("history dimension does not match the field")
    return ReducedField(f, history, hi)


@dataclass(frozen=True, eq=False)
class ODEResult:
    path: SampledPath
    derivative: np.ndarray
    blow_up: bool = False
    b_estimate: float | None = None
    stats: dict = field(default_factory=dict)


class _Diverged(Exception):
    def __init__(self, nonfinite: bool = False):
        super().__init__()
        self.nonfinite = nonfinite


def _norm(v) -> float:
    return float(np.sqrt(np.dot(v, v)))


def _implicit_step(g, t0, t1, x0, m, tol, itmax, u=None):
    H = t1 - t0
    frac = (np.arange(m) + 0.5) / m
    s = t0 + H * frac
    w = H / m
    if u is None:
        u = g.delayed(s)
    y = x0 + H * g(np.array([t0]), x0[None, :], g.delayed(np.array([t0])))[0]
    if not np.all(np.isfinite(y)):
        raise _Diverged(True)
    for it in range(1, itmax + 1):
        xs = x0[None, :] + frac[:, None] * (y - x0)[None, :]
        G = g(s, xs, u)
        y_new = x0 + w * np.sum(G, axis=0)
        if not np.all(np.isfinite(y_new)):
            raise _Diverged(True)
        if _norm(y_new - y) <= tol * (1.0 + _norm(y_new)):
            return y_new, it
        y = y_new
    raise _Diverged


def integrate_caratheodory_ode(g, x0, span, h: float = 1e-3, picard_tol: float = 1e-12,
                               picard_max: int = 50, sub_steps: int = 2,
                               escape_radius: float = np.inf, max_bisect: int = 30) -> ODEResult:
    """Integral-form solution of ``x' = g(t, x)`` on ``span`` starting at ``x0``.

    ``g`` is a :class:`ReducedField` or any object with ``__call__(t, X, U)``,
    ``delayed(t)`` and ``breakpoints``.  Returns node values, right-hand
    derivative samples ``g(t_k, x_k)`` and a blow-up flag when ``|x|`` exceeds
    ``escape_radius`` or the iteration produces non-finite values.
    """
    a, b = (float(v) for v in span)
    x = np.atleast_1d(np.asarray(x0, float)).copy()
    edges = time_edges(a, b, h, getattr(g, "breakpoints", ()))
    m = sub_steps
    frac = (np.arange(m) + 0.5) / m
    sub = edges[:-1, None] + np.diff(edges)[:, None] * frac[None, :]
    U = g.delayed(sub.ravel()).reshape(len(edges) - 1, m, -1)
    times, values = [a], [x.copy()]
    stats = {"steps": 0, "picard_iterations": 0, "picard_max_used": 0, "bisections": 0}
    blow, b_est = False, None

    def advance(t0, t1, xv, depth, u=None):
        try:
            y, it = _implicit_step(g, t0, t1, xv, m, picard_tol, picard_max, u)
            stats["picard_iterations"] += it
            stats["picard_max_used"] = max(stats["picard_max_used"], it)
            return [(t1, y)]
        except _Diverged:
            if depth >= max_bisect:
                raise
            stats["bisections"] += 1
            tm = 0.5 * (t0 + t1)
            left = advance(t0, tm, xv, depth + 1)
            if _norm(left[-1][1]) > escape_radius:
                return left
            return left + advance(tm, t1, left[-1][1], depth + 1)

    for k in range(len(edges) - 1):
        t0, t1 = edges[k], edges[k + 1]
        try:
            nodes = advance(t0, t1, x, 0, U[k])
        except _Diverged as err:
            if err.nonfinite:
                blow, b_est = True, float(t0)
                break
            raise PicardError(f"fixed-point iteration failed at step {k} (t = {t0:.6g})") from None
        stats["steps"] += 1
        for tn, xn in nodes:
            times.append(tn)
            values.append(xn)
            if _norm(xn) > escape_radius:
                blow, b_est = True, float(tn)
                break
        x = values[-1]
        if blow:
            break
    T = np.asarray(times)
    X = np.asarray(values)
    with np.errstate(over="ignore", invalid="ignore"):
        D = g(T, X)
    return ODEResult(SampledPath(T, X), D, blow, b_est, stats)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Solution on ``[-1, t_end]``: node values on ``[0, t_end]``, right-hand
    derivative samples there, and the initial history."""

    history: InitialHistory
    grid: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    blow_up: bool
    b_estimate: float | None
    params: SolverParams
    stats: dict
    T: float

    @property
    def t_end(self) -> float:
        return float(self.grid[-1])

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def path(self) -> SampledPath:
        hg = self.history.path.grid
        keep = hg < -1e-12
        g = np.concatenate([hg[keep], self.grid])
        v = np.concatenate([self.history.path.values[keep], self.values])
        return SampledPath(g, v)

    def __call__(self, t):
        return self.path(t)

    def derivative_pieces(self) -> list:
        """Derivative on ``[-1, 0]`` (when known) and on ``[0, t_end]``."""
        pieces = []
        if self.history.derivative is not None:
            pieces.append(self.history.derivative)
        if len(self.grid) > 1:
            pieces.append(SampledPath(self.grid, self.derivative))
        return pieces

    def residuals(self) -> np.ndarray:
        """``|x(t) - phi(0) - Q(t)|`` at the nodes, ``Q`` the trapezoid sum of
        the derivative samples."""
        d = self.derivative
        Q = np.concatenate([np.zeros((1, self.dim)),
                            np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(self.grid)[:, None], axis=0)])
        return np.linalg.norm(self.values - self.values[0] - Q, axis=1)

    @property
    def residual_max(self) -> float:
        r = self.residuals()
        return float(np.nanmax(r)) if len(r) else 0.0

    @property
    def residual_ok(self) -> bool:
        """Integral-form invariant; not meaningful once ``|x|`` blows up."""
        return self.blow_up or self.residual_max <= self.params.residual_factor * self.params.h

    def report(self) -> dict:
        return {"blow_up": self.blow_up, "b_estimate": self.b_estimate, "t_end": self.t_end,
                "T": self.T, "residual_max": self.residual_max, "residual_ok": self.residual_ok,
                "picard": dict(self.stats), "params": self.params.to_json()}


def _as_history(phi, dim: int) -> InitialHistory:
    if isinstance(phi, InitialHistory):
        return phi
    if isinstance(phi, SampledPath):
        return InitialHistory(phi)
    if callable(phi):
        return InitialHistory.from_function(phi)
    return InitialHistory.constant(np.broadcast_to(np.asarray(phi, float), (dim,)))


def solve(f: VectorField, phi, T: float, params: SolverParams = SolverParams()) -> Trajectory:
    """Method of steps on ``[0, T]``; stops at the first node with ``|x| > escape_radius``."""
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    hist = _as_history(phi, f.dim)
    if hist.dim != f.dim:
        raise ValueError("initial history dimension does not match the field")
    x0 = hist.path.values[-1]
    grids = [np.array([0.0])]
    vals = [x0[None, :]]
    stats = {"steps": 0, "picard_iterations": 0, "picard_max_used": 0, "bisections": 0}
    blow, b_est = False, None
    seg = hist.path
    k = 0
    while k < T:
        hi = min(k + 1.0, float(T))
        g = step_reduce(f, seg)
        r = integrate_caratheodory_ode(g, vals[-1][-1], (k, hi), params.h, params.picard_tol,
                                       params.picard_max, params.sub_steps, params.escape_radius,
                                       params.max_bisect)
        for key in stats:
            stats[key] = max(stats[key], r.stats[key]) if key == "picard_max_used" else stats[key] + r.stats[key]
        grids.append(r.path.grid[1:])
        vals.append(r.path.values[1:])
        if r.blow_up:
            blow, b_est = True, r.b_estimate
            break
        # history for the next unit interval: this step's nodes
        seg = r.path
        k += 1
    grid = np.concatenate(grids)
    values = np.concatenate(vals)
    past = SampledPath(np.concatenate([hist.path.grid[:-1], grid]),
                       np.concatenate([hist.path.values[:-1], values]))
    with np.errstate(over="ignore", invalid="ignore"):
        D = f.eval(grid, values, past(grid - 1.0))
    return Trajectory(hist, grid, values, D, blow, b_est, params, stats, float(T))


def segment(traj: Trajectory, t: float) -> SampledPath:
    """State segment ``s -> x(t + s)`` on ``[-1, 0]``."""
    path = traj.path
    lo, hi = path.span
    if t - 1.0 < lo - 1e-12 or t > hi + 1e-12:
        raise ValueError(f"segment at t = {t} leaves the trajectory span [{lo}, {hi}]")
    inner = path.grid[(path.grid > t - 1.0 + 1e-12) & (path.grid < t - 1e-12)]
    g = np.concatenate([[t - 1.0], inner, [t]])
    vals = path(g)
    g = g - t
    g[0], g[-1] = -1.0, 0.0
    return SampledPath(g, vals)


def _lp_trapezoid(pieces: Sequence[SampledPath], lo: float, hi: float, p: float) -> float:
    total = 0.0
    for d in pieces:
        a, b = max(lo, d.span[0]), min(hi, d.span[1])
        if b <= a:
            continue
        g = d.grid[(d.grid > a) & (d.grid < b)]
        g = np.concatenate([[a], g, [b]])
        v = np.linalg.norm(d(g), axis=1) ** p
        total += float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(g)))
    return total ** (1.0 / p)


def c1p_norm(x: SampledPath, derivative, interval, p: float) -> float:
    """``max |x|`` over nodes in ``interval`` plus the L^p norm of the
    derivative; ``derivative`` is a path or a list of paths on adjacent pieces."""
    if derivative is None or (isinstance(derivative, (list, tuple)) and not derivative):
        raise ValueError("C^{1,p} norm needs derivative samples")
    pieces = [derivative] if isinstance(derivative, SampledPath) else list(derivative)
    lo, hi = (float(v) for v in interval)
    covered = sorted((d.span for d in pieces))
    edge = lo
    for a, b in covered:
        if a > edge + 1e-9:
            break
        edge = max(edge, b)
    if edge < hi - 1e-9:
        raise ValueError("derivative samples do not cover the interval")
    g = x.grid[(x.grid > lo) & (x.grid < hi)]
    g = np.concatenate([[lo], g, [hi]])
    sup = float(np.max(np.linalg.norm(x(g), axis=1)))
    return sup + _lp_trapezoid(pieces, lo, hi, p)


def trajectory_difference(a: Trajectory, b: Trajectory):
    """``x_a - x_b`` and the derivative difference pieces on the union grids."""
    pa, pb = a.path, b.path
    lo = max(pa.span[0], pb.span[0])
    hi = min(pa.span[1], pb.span[1])
    g = np.union1d(pa.grid, pb.grid)
    g = g[(g >= lo) & (g <= hi)]
    x = SampledPath(g, pa(g) - pb(g))
    pieces = []
    da, db = a.derivative_pieces(), b.derivative_pieces()
    if a.history.derivative is not None and b.history.derivative is not None:
        hg = np.union1d(a.history.derivative.grid, b.history.derivative.grid)
        pieces.append(SampledPath(hg, a.history.derivative(hg) - b.history.derivative(hg)))
    if len(a.grid) > 1 and len(b.grid) > 1:
        sa, sb = da[-1], db[-1]
        hi = min(sa.span[1], sb.span[1])
        sg = np.union1d(sa.grid, sb.grid)
        sg = sg[sg <= hi]
        pieces.append(SampledPath(sg, sa(sg) - sb(sg)))
    return x, pieces


def c1p_modulus_tau(j: float, p: float) -> PowerModulus:
    """Hoelder envelope ``min(j * h**(1 - 1/p), j)`` of the C^{1,p} ball of radius ``j``."""
    if p <= 1:
        raise UnsupportedExponentError("the Hoelder envelope needs p > 1; at p = 1 no such estimate holds")
    return PowerModulus(float(j), 1.0 - 1.0 / p, float(j))
