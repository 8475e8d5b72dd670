"""Optimal m-, l-, l1- and l2-bounds on balls, family bound tests, and the
moduli of continuity generated by m-bounds.

Suprema over the ball ``B_j`` of R^{2N} are taken over the lattice
``spatial_res * Z^{2N}`` intersected with the ball, followed by one refinement
pass on the half-step lattice around the maximizer.  The refined probes belong
to the next finer lattice, so halving ``spatial_res`` never lowers a bound.
All reported values are therefore lower bounds of the true suprema.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from . import kernels
from .expr import EvaluationError
from .model import ModulusSet, RationalInterval, TableModulus, VectorField
from .quadrature import GaussRule, ball_lattice, gauss_rule

KINDS = ("m", "l", "l1", "l2")
MIN_PAIR_DISTANCE = 1e-9


class InvalidModulusError(ValueError):
    """The sampled window integrals do not vanish with the window length."""


@dataclass(frozen=True, eq=False)
class BoundFunction:
    """A nonnegative function of time sampled at the nodes of ``rule``."""

    kind: str
    radius: float
    rule: GaussRule
    values: np.ndarray
    p: int = 1

    @property
    def t(self) -> np.ndarray:
        return self.rule.nodes

    def integral(self, p: float | None = None) -> float:
        """Quadrature of ``values**p`` over the whole rule."""
        p = self.p if p is None else p
        return self.rule.integrate(self.values ** p)

    def cumulative(self) -> np.ndarray:
        return self.rule.cumulative(self.values)


def _eval(f: VectorField, t, X, U) -> np.ndarray:
    try:
        return f.eval(t, X, U)
    except EvaluationError as err:
        tt, XX, UU = np.broadcast_arrays(np.asarray(t, float)[..., None], X, U)
        flat_t = tt[..., 0].ravel()
        flat_x = XX.reshape(-1, f.dim)
        flat_u = UU.reshape(-1, f.dim)
        for k in range(len(flat_t)):
            try:
                f.eval(flat_t[k], flat_x[k], flat_u[k])
            except EvaluationError as inner:
                raise EvaluationError(
                    f"{inner} at t={flat_t[k]!r}, x={flat_x[k].tolist()}, u={flat_u[k].tolist()}"
                ) from None
        raise err


def _half_offsets(dim: int, free: Sequence[int]) -> np.ndarray:
    """Integer offsets (units of half a lattice step) spanning +-1 step on the
    coordinates listed in ``free``."""
    rng = range(-2, 3)
    offs = []
    for combo in product(rng, repeat=len(free)):
        o = np.zeros(dim, dtype=np.int64)
        o[list(free)] = combo
        offs.append(o)
    return np.array(offs)


def _refined(center_k: np.ndarray, offsets: np.ndarray, step: float, radius: float):
    """Half-step lattice points around ``center_k`` inside the ball.

    Returns points of shape (T, n_off, d) and a validity mask (T, n_off).
    """
    half = 2 * center_k[:, None, :] + offsets[None, :, :]
    r2 = (radius / (0.5 * step)) ** 2 * (1 + 1e-9)
    ok = np.sum(half.astype(float) ** 2, axis=-1) <= r2
    return half * (0.5 * step), ok


def optimal_m_bound(f: VectorField, j: float, interval: RationalInterval,
                    spatial_res: float = 0.1, time_res: float = 0.01, order: int = 3) -> BoundFunction:
    """Sampled ``m^j(t) = sup_{(x,u) in B_j} |f(t, x, u)|``."""
    N = f.dim
    rule = gauss_rule(interval.lo, interval.hi, time_res, f.breakpoints, order)
    ks, pts = ball_lattice(j, spatial_res, 2 * N)
    t = rule.nodes
    vals = np.linalg.norm(_eval(f, t[:, None], pts[None, :, :N], pts[None, :, N:]), axis=-1)
    arg = np.argmax(vals, axis=1)
    m = vals[np.arange(len(t)), arg]
    rp, ok = _refined(ks[arg], _half_offsets(2 * N, range(2 * N)), spatial_res, j)
    rv = np.linalg.norm(_eval(f, t[:, None], rp[..., :N], rp[..., N:]), axis=-1)
    rv = np.where(ok, rv, 0.0)
    m = np.maximum(m, rv.max(axis=1))
    return BoundFunction("m", float(j), rule, m, f.p)


def _groups(ks: np.ndarray, cols: slice) -> np.ndarray:
    _, inv = np.unique(ks[:, cols], axis=0, return_inverse=True)
    return np.asarray(inv, dtype=np.intp).ravel()


def optimal_l_bound(f: VectorField, j: float, interval: RationalInterval,
                    spatial_res: float = 0.1, time_res: float = 0.01, kind: str = "l",
                    order: int = 3) -> BoundFunction:
    """Sampled Lipschitz bound of ``f(t, .)`` on ``B_j``.

    ``kind`` selects which coordinates may differ between the two probes:
    ``"l"`` all of them, ``"l1"`` only x (u shared), ``"l2"`` only u (x shared).
    Pairs closer than 1e-9 are skipped.
    """
    if kind not in ("l", "l1", "l2"):
        raise ValueError(f"unknown l-bound kind {kind!r}")
    N = f.dim
    rule = gauss_rule(interval.lo, interval.hi, time_res, f.breakpoints, order)
    ks, pts = ball_lattice(j, spatial_res, 2 * N)
    t = rule.nodes
    vals = np.ascontiguousarray(_eval(f, t[:, None], pts[None, :, :N], pts[None, :, N:]))
    if kind == "l":
        group, free = np.zeros(len(ks), dtype=np.intp), range(2 * N)
    elif kind == "l1":
        group, free = _groups(ks, slice(N, None)), range(N)
    else:
        group, free = _groups(ks, slice(0, N)), range(N, 2 * N)
    best, ia, ib = kernels.max_pair_quotient(vals, np.ascontiguousarray(pts), group, MIN_PAIR_DISTANCE)
    # refinement around the best pair
    offs = _half_offsets(2 * N, free)
    hit = ia >= 0
    if np.any(hit):
        ta = t[hit]
        pa, oka = _refined(ks[ia[hit]], offs, spatial_res, j)
        pb, okb = _refined(ks[ib[hit]], offs, spatial_res, j)
        va = _eval(f, ta[:, None], pa[..., :N], pa[..., N:])
        vb = _eval(f, ta[:, None], pb[..., :N], pb[..., N:])
        dv = np.linalg.norm(va[:, :, None, :] - vb[:, None, :, :], axis=-1)
        dp = np.linalg.norm(pa[:, :, None, :] - pb[:, None, :, :], axis=-1)
        valid = oka[:, :, None] & okb[:, None, :] & (dp >= MIN_PAIR_DISTANCE)
        q = np.where(valid, dv / np.where(valid, dp, 1.0), 0.0)
        best = best.copy()
        best[hit] = np.maximum(best[hit], q.reshape(len(ta), -1).max(axis=1))
    return BoundFunction(kind, float(j), rule, best, f.p)


def optimal_l1_bound(f, j, interval, spatial_res=0.1, time_res=0.01, order=3) -> BoundFunction:
    return optimal_l_bound(f, j, interval, spatial_res, time_res, "l1", order)


def optimal_l2_bound(f, j, interval, spatial_res=0.1, time_res=0.01, order=3) -> BoundFunction:
    return optimal_l_bound(f, j, interval, spatial_res, time_res, "l2", order)


def bound(f, kind: str, j, interval, spatial_res=0.1, time_res=0.01, order=3) -> BoundFunction:
    if kind == "m":
        return optimal_m_bound(f, j, interval, spatial_res, time_res, order)
    return optimal_l_bound(f, j, interval, spatial_res, time_res, kind, order)


def lp_loc_bound(family: Sequence[VectorField], j: float, r: float, p: float = 1,
                 spatial_res: float = 0.1, time_res: float = 0.01, kind: str = "m") -> float:
    """``max_f  int_{-r}^{r} (bound_f^j)^p`` for the chosen bound kind."""
    if not family:
        raise ValueError("family must be nonempty")
    I = RationalInterval.symmetric(r)
    return max(bound(f, kind, j, I, spatial_res, time_res).integral(p) for f in family)


def _window_sup(cums: Sequence[np.ndarray], k: int, starts: int) -> float:
    """max over the family and over start edges ``i < starts`` of C[i+k] - C[i]."""
    best = 0.0
    for c in cums:
        best = max(best, float(np.max(c[k:k + starts] - c[:starts])))
    return best


def equicontinuity_table(family: Sequence[VectorField], j: float, r: float, eps_list: Sequence[float],
                         spatial_res: float = 0.1, time_res: float = 0.01) -> list[tuple[float, float]]:
    """For each eps, the largest window length delta (a multiple of the time
    step) such that every window of that length inside [-r, r] carries less
    than eps of m-bound mass, uniformly over the family.  ``delta = 0`` means
    no tested window length qualifies."""
    if not family:
        raise ValueError("family must be nonempty")
    if any(e <= 0 for e in eps_list):
        raise ValueError("eps values must be positive")
    I = RationalInterval.symmetric(r)
    bounds = [optimal_m_bound(f, j, I, spatial_res, time_res) for f in family]
    cums = [b.cumulative() for b in bounds]
    n = len(cums[0]) - 1
    step = 2.0 * r / n

    def W(k):
        return _window_sup(cums, k, n - k + 1)

    table = []
    for eps in eps_list:
        if W(n) < eps:
            table.append((float(eps), 2.0 * float(r)))
            continue
        lo, hi = 0, n  # W(lo) < eps <= W(hi)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if W(mid) < eps:
                lo = mid
            else:
                hi = mid
        table.append((float(eps), lo * step))
    return table


@dataclass
class FamilyBoundReport:
    family: list
    lp_sup: dict = field(default_factory=dict)
    equicontinuity: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "lp_sup": {str(r): {str(j): v for j, v in row.items()} for r, row in self.lp_sup.items()},
            "equicontinuity": {str(r): [[e, d] for e, d in rows] for r, rows in self.equicontinuity.items()},
        }


def family_report(family: Sequence[VectorField], j_list, r_list, p=1, eps_list=(0.1,),
                  spatial_res=0.1, time_res=0.01) -> FamilyBoundReport:
    rep = FamilyBoundReport([str(f) for f in family])
    for r in sorted(r_list):
        rep.lp_sup[r] = {j: lp_loc_bound(family, j, r, p, spatial_res, time_res) for j in sorted(j_list)}
        rep.equicontinuity[r] = equicontinuity_table(family, max(j_list), r, eps_list, spatial_res, time_res)
    return rep


def _theta_table(family, j, interval: RationalInterval, s_max: float, spatial_res, time_res,
                 check: bool) -> TableModulus:
    ext = RationalInterval(interval.q1, interval.q2 + RationalInterval(0, s_max).q2)
    cums = [optimal_m_bound(f, j, ext, spatial_res, time_res).cumulative() for f in family]
    n = len(cums[0]) - 1
    step = (ext.hi - ext.lo) / n
    starts = int(round(interval.length / step)) + 1
    K = n - starts + 1
    theta = np.array([_window_sup(cums, k, starts) for k in range(K + 1)])
    theta[0] = 0.0
    theta = np.maximum.accumulate(theta)
    if check and K >= 4 and theta[1] > 0.0 and theta[1] > 0.75 * theta[4]:
        raise InvalidModulusError(
            f"window integrals do not vanish for j={j}, I={interval}: "
            f"theta({step:.3g})={theta[1]:.4g}, theta({4 * step:.3g})={theta[4]:.4g}"
        )
    return TableModulus(step * np.arange(K + 1), theta)


def moduli_from_m_bounds(family: Sequence[VectorField], j_list, I_list, s_max: float | None = None,
                         spatial_res: float = 0.1, time_res: float = 0.01, check: bool = True) -> ModulusSet:
    """``theta^I_j(s) = sup_{t in I, f in family} int_t^{t+s} m_f^j``, tabulated
    at multiples of ``time_res`` up to ``s_max`` (default: longest interval).

    The result is made monotone under interval inclusion and radius growth by
    taking running maxima, which can only enlarge each modulus.
    """
    if not family:
        raise ValueError("family must be nonempty")
    I_list = [RationalInterval.from_json(I) for I in I_list]
    if s_max is None:
        s_max = max(I.length for I in I_list)
    raw = {}
    for I in I_list:
        for j in j_list:
            raw[(I, float(j))] = _theta_table(family, j, I, s_max, spatial_res, time_res, check)
    entries = {}
    for (I, j), m in raw.items():
        below = [m2 for (I2, j2), m2 in raw.items() if I.contains(I2) and j2 <= j]
        v = np.max([b(m.s) for b in below], axis=0)
        entries[(I, j)] = TableModulus(m.s, v)
    return ModulusSet(entries)


def field_moduli(f: VectorField, j_list, window: RationalInterval, s_max: float = 1.0,
                 period: float | None = None, spatial_res: float = 0.1, time_res: float = 0.01,
                 check: bool = True) -> ModulusSet:
    """Interval-independent moduli ``theta_j(s) = sup_t int_t^{t+s} m^j`` of a
    single field; the sup over t runs over ``window`` (one period suffices when
    ``period`` is given)."""
    window = RationalInterval.from_json(window)
    if period is not None:
        window = RationalInterval(window.q1, window.q1 + RationalInterval(0, period).q2)
    by_radius = {}
    for j in sorted(float(j) for j in j_list):
        m = _theta_table([f], j, window, s_max, spatial_res, time_res, check)
        if by_radius:
            prev = by_radius[max(by_radius)]
            m = TableModulus(m.s, np.maximum(m.v, prev(m.s)))
        by_radius[j] = m
    return ModulusSet(by_radius=by_radius)
