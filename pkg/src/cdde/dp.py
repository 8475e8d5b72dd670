"""Longest-path dynamic programming over layered graphs.

A problem has one weight per node; transitions between consecutive layers are
given as CSR adjacency (``indptr``, ``indices``) with ascending successor
indices.  The score of a path is the right fold
``w[0][a0] + (w[1][a1] + (... + w[L-1][aL-1]))``; this is exactly the
association used by the backward recursion, so the DP optimum is bit-identical
to the best enumerated score.  Among optimal paths the lexicographically
smallest node-index sequence is returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from . import kernels

__all__ = ["CSR", "DPProblem", "DPResult", "InfeasibleProblemError", "sup_path_integral",
           "lattice_transitions", "product_transitions", "fold_sum", "offsets_within"]


class InfeasibleProblemError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CSR:
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def n_rows(self) -> int:
        return len(self.indptr) - 1

    def row(self, a: int) -> np.ndarray:
        return self.indices[self.indptr[a]:self.indptr[a + 1]]

    @classmethod
    def from_mask(cls, mask) -> "CSR":
        mask = np.asarray(mask, dtype=bool)
        rows, cols = np.nonzero(mask)
        indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=mask.shape[0]))])
        return cls(indptr.astype(np.intp), cols.astype(np.intp))


@dataclass(frozen=True, eq=False)
class DPProblem:
    weights: Sequence[np.ndarray]
    transitions: Sequence[CSR]
    objective: str = "max"

    def __post_init__(self):
        L = len(self.weights)
        if L < 1:
            raise ValueError("a layered problem needs at least one layer")
        if len(self.transitions) != L - 1:
            raise ValueError("need one transition per consecutive pair of layers")
        if self.objective not in ("max", "min"):
            raise ValueError("objective must be 'max' or 'min'")
        for l, csr in enumerate(self.transitions):
            if csr.n_rows != len(self.weights[l]):
                raise ValueError(f"transition {l} has {csr.n_rows} rows for {len(self.weights[l])} nodes")
            if len(csr.indices) and (csr.indices.min() < 0 or csr.indices.max() >= len(self.weights[l + 1])):
                raise ValueError(f"transition {l} points outside layer {l + 1}")
        for w in self.weights:
            if not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite")


@dataclass(frozen=True)
class DPResult:
    value: float
    path: tuple


def sup_path_integral(problem: DPProblem) -> DPResult:
    """Exact optimum over all feasible layered paths."""
    sign = 1.0 if problem.objective == "max" else -1.0
    w = [np.asarray(x, dtype=float) for x in problem.weights]
    sizes = [len(x) for x in w]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.intp)
    flat = np.ascontiguousarray(np.concatenate(w) * sign) if sign < 0 else np.ascontiguousarray(np.concatenate(w))
    # share identical CSR objects between transitions
    uniq: dict[int, int] = {}
    templates: list[CSR] = []
    template_of = np.empty(len(problem.transitions), dtype=np.intp)
    for l, csr in enumerate(problem.transitions):
        key = id(csr)
        if key not in uniq:
            uniq[key] = len(templates)
            templates.append(csr)
        template_of[l] = uniq[key]
    starts, ptrs, idxs, base = [], [], [], 0
    row_base = 0
    for csr in templates:
        starts.append(row_base)
        ptrs.append(np.asarray(csr.indptr[:-1], dtype=np.intp) + base)
        idxs.append(np.asarray(csr.indices, dtype=np.intp))
        base += len(csr.indices)
        row_base += csr.n_rows
    if templates:
        indptr = np.concatenate(ptrs + [np.array([base], dtype=np.intp)])
        # each template row block needs its own terminating pointer: rows are
        # contiguous, so the next block's first pointer closes the previous one
        indices = np.concatenate(idxs) if base else np.empty(0, dtype=np.intp)
    else:
        indptr = np.zeros(1, dtype=np.intp)
        indices = np.empty(0, dtype=np.intp)
    best, nxt = kernels.dp_backward(flat, offsets, template_of,
                                    np.asarray(starts, dtype=np.intp), indptr, indices)
    first = best[:sizes[0]]
    opt = float(np.max(first))
    if opt == -np.inf:
        raise InfeasibleProblemError("no path satisfies the transition constraints")
    a = int(np.argmax(first))
    path = [a]
    for l in range(len(sizes) - 1):
        a = int(nxt[offsets[l] + a])
        path.append(a)
    return DPResult(sign * opt, tuple(path))


def fold_sum(w) -> float:
    """Right fold ``w[0] + (w[1] + (...))``, the DP's path score."""
    w = np.asarray(w, dtype=float)
    if len(w) == 0:
        return 0.0
    return float(np.cumsum(w[::-1])[-1])


def offsets_within(c2: float, dim: int) -> np.ndarray:
    """Integer vectors ``o`` with ``|o|^2 <= c2``, lexicographic order."""
    K = int(np.floor(np.sqrt(max(c2, 0.0))))
    axis = np.arange(-K, K + 1)
    if dim == 1:
        offs = axis[:, None]
    else:
        offs = np.array(list(product(axis, repeat=dim)), dtype=np.int64)
    keep = np.sum(offs.astype(float) ** 2, axis=1) <= c2
    return offs[keep].astype(np.int64)


def lattice_transitions(ks: np.ndarray, c2: float) -> CSR:
    """Transitions between nodes with integer coordinates ``ks`` (rows in
    lexicographic order) whose squared lattice distance is at most ``c2``."""
    ks = np.asarray(ks, dtype=np.int64)
    n, d = ks.shape
    lo = ks.min(axis=0)
    span = ks.max(axis=0) - lo + 1
    box = np.full(tuple(span), -1, dtype=np.intp)
    box[tuple((ks - lo).T)] = np.arange(n)
    offs = offsets_within(c2, d)
    cols = []
    for o in offs:
        nb = ks + o - lo
        inside = np.all((nb >= 0) & (nb < span), axis=1)
        idx = np.full(n, -1, dtype=np.intp)
        idx[inside] = box[tuple(nb[inside].T)]
        cols.append(idx)
    cols = np.stack(cols, axis=1) if cols else np.full((n, 0), -1, dtype=np.intp)
    valid = cols >= 0
    counts = valid.sum(axis=1)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.intp)
    return CSR(indptr, cols[valid].astype(np.intp))


def product_transitions(a: CSR, b: CSR) -> CSR:
    """Transitions on the product node set ``(i, k) -> i * n_b + k``, feasible
    iff both component transitions are feasible."""
    na, nb = a.n_rows, b.n_rows
    ca, cb = np.diff(a.indptr), np.diff(b.indptr)
    counts = (ca[:, None] * cb[None, :]).ravel()
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.intp)
    out = np.empty(indptr[-1], dtype=np.intp)
    pos = 0
    for i in range(na):
        ra = a.row(i)
        block = (ra[:, None] * nb)
        for k in range(nb):
            rb = b.row(k)
            vals = (block + rb[None, :]).ravel()
            out[pos:pos + len(vals)] = vals
            pos += len(vals)
    return CSR(indptr, out)
