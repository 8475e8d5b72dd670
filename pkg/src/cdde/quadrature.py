"""Time grids, composite quadrature rules and spatial lattices."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

_MERGE = 1e-12


def _merge_close(pts: np.ndarray, scale: float) -> np.ndarray:
    pts = np.unique(pts)
    if len(pts) < 2:
        return pts
    keep = np.concatenate([[True], np.diff(pts) > _MERGE * max(scale, 1.0)])
    return pts[keep]


def time_edges(lo: float, hi: float, step: float, breakpoints=(), anchor: float = 0.0) -> np.ndarray:
    """Cell edges on ``[lo, hi]``: multiples of ``step`` (offset by ``anchor``)
    plus the endpoints and every breakpoint strictly inside."""
    if not hi > lo:
        raise ValueError("empty time interval")
    if step <= 0:
        raise ValueError("time step must be positive")
    k0 = np.ceil((lo - anchor) / step - 1e-9)
    k1 = np.floor((hi - anchor) / step + 1e-9)
    lattice = anchor + step * np.arange(k0, k1 + 1)
    bps = np.asarray([b for b in breakpoints if lo < b < hi], dtype=float)
    pts = np.concatenate([[lo, hi], lattice[(lattice > lo) & (lattice < hi)], bps])
    edges = _merge_close(pts, max(abs(lo), abs(hi)))
    edges[0], edges[-1] = lo, hi
    return edges


@dataclass(frozen=True)
class MidpointGrid:
    edges: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def __len__(self):
        return len(self.edges) - 1


def midpoint_grid(lo, hi, step, breakpoints=(), anchor=0.0) -> MidpointGrid:
    return MidpointGrid(time_edges(lo, hi, step, breakpoints, anchor))


@dataclass(frozen=True)
class GaussRule:
    """Composite Gauss-Legendre rule on uniform cells, with every cell split at
    the breakpoints it contains."""

    edges: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    cell: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def cell_integrals(self, values) -> np.ndarray:
        return np.bincount(self.cell, weights=self.weights * values, minlength=len(self.edges) - 1)

    def cumulative(self, values) -> np.ndarray:
        """Integral from the left end to every edge."""
        return np.concatenate([[0.0], np.cumsum(self.cell_integrals(values))])


def gauss_rule(lo: float, hi: float, step: float, breakpoints=(), order: int = 3) -> GaussRule:
    n = max(int(np.ceil((hi - lo) / step - 1e-9)), 1)
    edges = np.linspace(lo, hi, n + 1)
    x, w = np.polynomial.legendre.leggauss(order)
    bps = np.asarray(sorted(b for b in breakpoints if lo < b < hi), dtype=float)
    nodes, weights, cell = [], [], []
    for k in range(n):
        a, b = edges[k], edges[k + 1]
        inner = bps[(bps > a) & (bps < b)]
        cuts = np.concatenate([[a], inner, [b]])
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            if c1 - c0 <= _MERGE * max(abs(c0), 1.0):
                continue
            half = 0.5 * (c1 - c0)
            nodes.append(c0 + half * (x + 1.0))
            weights.append(half * w)
            cell.append(np.full(order, k))
    return GaussRule(edges, np.concatenate(nodes), np.concatenate(weights), np.concatenate(cell))


def ball_lattice(radius: float, step: float, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer coordinates ``k`` (lexicographic order) with ``|k * step| <= radius``,
    and the corresponding points."""
    kmax = int(np.floor(radius / step + 1e-9))
    axis = np.arange(-kmax, kmax + 1)
    if dim == 1:
        ks = axis[:, None]
    else:
        ks = np.array(list(product(axis, repeat=dim)), dtype=np.int64)
    r2 = (radius / step) ** 2 * (1 + 1e-9)
    keep = np.sum(ks.astype(float) ** 2, axis=1) <= r2
    ks = ks[keep].astype(np.int64)
    return ks, ks * step
