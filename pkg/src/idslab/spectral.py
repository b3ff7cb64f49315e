"""Laplacians of finite graphs and windows, eigenvalue counting functions.

``count_function`` returns n(A)(E) = #{eigenvalues <= E} as a right-continuous
:class:`StepFunction`.  Small connected blocks go through a dense symmetric
eigensolver; large ones are resolved by bisection on inertia counts of a
banded LDL^T factorisation (Sylvester's law of inertia).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, reverse_cuthill_mckee

from . import kernels
from .geometry import Indexer, _isin_sorted, as_vertex_set, core

DENSE_CUTOFF = 2048
BISECT_TOL = 1e-10
MULTIPLICITY_TOL = 1e-9
SNAP_GRID = 2.0 ** -36
EPS = np.finfo(np.float64).eps


class SpectralError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# step functions


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous nondecreasing step function, 0 left of all breakpoints.

    ``values[i]`` is the value on ``[breakpoints[i], breakpoints[i+1])``.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=np.float64).reshape(-1)
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if b.shape != v.shape:
            raise ValueError("breakpoints and values differ in length")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls(np.zeros(0), np.zeros(0))

    @classmethod
    def from_jumps(cls, points, sizes) -> "StepFunction":
        points = np.asarray(points, dtype=np.float64)
        sizes = np.asarray(sizes, dtype=np.float64)
        order = np.argsort(points, kind="stable")
        points, sizes = points[order], sizes[order]
        uniq, inv = np.unique(points, return_inverse=True)
        merged = np.zeros(len(uniq))
        np.add.at(merged, inv, sizes)
        return cls(uniq, np.cumsum(merged))

    @property
    def final(self) -> float:
        return float(self.values[-1]) if len(self.values) else 0.0

    @property
    def jumps(self) -> np.ndarray:
        return np.diff(self.values, prepend=0.0)

    def __call__(self, E):
        E = np.asarray(E, dtype=np.float64)
        idx = np.searchsorted(self.breakpoints, E, side="right") - 1
        vals = np.concatenate([[0.0], self.values])
        return vals[idx + 1]

    def left_limit(self, E):
        E = np.asarray(E, dtype=np.float64)
        idx = np.searchsorted(self.breakpoints, E, side="left") - 1
        vals = np.concatenate([[0.0], self.values])
        return vals[idx + 1]

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values, prepend=0.0) >= 0))

    def compress(self) -> "StepFunction":
        """Drop breakpoints where the value does not change."""
        keep = np.diff(self.values, prepend=0.0) != 0
        return StepFunction(self.breakpoints[keep], self.values[keep])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# final={format(self.final, '.17g')}\n")
            fh.write("breakpoint,value\n")
            for b, v in zip(self.breakpoints, self.values):
                fh.write(f"{format(b, '.17g')},{format(v, '.17g')}\n")

    @classmethod
    def read_csv(cls, path) -> "StepFunction":
        bs, vs = [], []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or line == "breakpoint,value":
                    continue
                b, v = line.split(",")
                bs.append(float(b))
                vs.append(float(v))
        return cls(np.array(bs), np.array(vs))


def merged_breakpoints(*fs: StepFunction) -> np.ndarray:
    if not fs:
        return np.zeros(0)
    return np.unique(np.concatenate([f.breakpoints for f in fs]))


def sup_distance(f: StepFunction, g: StepFunction) -> float:
    """Exact sup over the real line of |f - g|."""
    B = merged_breakpoints(f, g)
    if len(B) == 0:
        return 0.0
    # both are constant on each [B_i, B_{i+1}) and zero before B_0
    return float(np.max(np.abs(f(B) - g(B))))


def scale(f: StepFunction, factor: float) -> StepFunction:
    if factor <= 0:
        raise ValueError("factor must be positive")
    return StepFunction(f.breakpoints, f.values * factor)


def combine(fs, weights=None) -> StepFunction:
    """Weighted sum of step functions on their merged breakpoints."""
    fs = list(fs)
    if weights is None:
        weights = np.ones(len(fs))
    B = merged_breakpoints(*fs)
    total = np.zeros(len(B))
    for f, w in zip(fs, weights):
        total += w * f(B)
    return StepFunction(B, total)


def stack_values(fs) -> tuple[np.ndarray, np.ndarray]:
    """Merged breakpoints and the matrix of every function evaluated there."""
    fs = list(fs)
    B = merged_breakpoints(*fs)
    return B, np.stack([f(B) for f in fs]) if fs else np.zeros((0, 0))


# --------------------------------------------------------------------------
# graphs and matrices


@dataclass(frozen=True)
class FiniteGraph:
    """Finite graph on an explicit vertex set of Z^d.

    ``edges`` holds index pairs ``i < j`` into ``vertices``, sorted.
    """

    vertices: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=np.int64)
        if V.ndim == 1:
            V = V.reshape(-1, 1)
        E = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(V) and not np.array_equal(V, as_vertex_set(V, V.shape[1])):
            raise ValueError("vertices must be sorted and duplicate free")
        if np.any(E[:, 0] == E[:, 1]):
            raise ValueError("self-loops are not allowed")
        if len(E) and (E.min() < 0 or E.max() >= len(V)):
            raise ValueError("edge endpoint outside the vertex set")
        E = np.sort(E, axis=1)
        E = np.unique(E, axis=0) if len(E) else E
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "edges", E)

    @classmethod
    def from_coords(cls, vertices, pairs=()) -> "FiniteGraph":
        V = as_vertex_set(vertices)
        d = V.shape[1]
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2, d)
        if len(pairs) == 0:
            return cls(V, np.zeros((0, 2), dtype=np.int64))
        idx = Indexer.covering(V)
        keys = idx.encode(V)
        ends = pairs.reshape(-1, d)
        if not np.all(idx.inside(ends)) or not np.all(_isin_sorted(idx.encode(ends), keys)):
            raise ValueError("edge endpoint outside the vertex set")
        e = np.searchsorted(keys, idx.encode(ends)).reshape(-1, 2)
        return cls(V, e)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def translate(self, x) -> "FiniteGraph":
        x = np.asarray(x, dtype=np.int64).reshape(1, -1)
        # translation preserves lexicographic order, so indices are unchanged
        return FiniteGraph(self.vertices + x, self.edges)

    def edge_coords(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices[self.edges[:, 0]], self.vertices[self.edges[:, 1]]

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.reshape(-1), minlength=self.num_vertices)

    def induced(self, keep: np.ndarray) -> "FiniteGraph":
        """Induced subgraph on the vertices selected by the boolean mask ``keep``."""
        new_index = np.cumsum(keep) - 1
        e = self.edges[keep[self.edges[:, 0]] & keep[self.edges[:, 1]]]
        return FiniteGraph(self.vertices[keep], new_index[e])


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric sparse matrix indexed by a vertex set."""

    matrix: sp.csr_matrix
    vertices: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix((self.matrix + other.matrix).tocsr(), self.vertices)

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix((self.matrix - other.matrix).tocsr(), self.vertices)


def _assemble(n: int, i, j, diag, vertices) -> SymMatrix:
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    vals = np.concatenate([-np.ones(2 * len(i)), np.asarray(diag, dtype=np.float64)])
    M = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    M.eliminate_zeros()
    return SymMatrix(M, vertices)


def graph_laplacian(S: FiniteGraph) -> SymMatrix:
    return _assemble(S.num_vertices, S.edges[:, 0], S.edges[:, 1], S.degrees(), S.vertices)


def compress_to(A: SymMatrix, U) -> SymMatrix:
    """Principal submatrix p_U A i_U on the vertices of U (a subset of A's)."""
    U = as_vertex_set(U, A.vertices.shape[1])
    idx = Indexer.covering(A.vertices, U)
    keys = idx.encode(A.vertices)
    uk = idx.encode(U)
    if not np.all(_isin_sorted(uk, keys)):
        raise ValueError("U is not contained in the matrix's vertex set")
    pos = np.searchsorted(keys, uk)
    return SymMatrix(A.matrix[pos][:, pos].tocsr(), U)


def _window_positions(w, Q):
    Q = as_vertex_set(Q, w.window.shape[1])
    if not w.contains_window(Q):
        raise ValueError("Q must be contained in the sampled window")
    qk = w.keys(Q)
    ia = _isin_sorted(w.ka, qk)
    ib = _isin_sorted(w.kb, qk)
    return Q, qk, ia, ib


def induced_graph(w, Q) -> FiniteGraph:
    """Gamma_omega[Q]: sampled edges with both endpoints in Q."""
    Q, qk, ia, ib = _window_positions(w, Q)
    both = ia & ib
    e = np.stack([np.searchsorted(qk, w.ka[both]), np.searchsorted(qk, w.kb[both])], axis=1)
    return FiniteGraph(Q, e)


def restricted_laplacian(w, Q) -> SymMatrix:
    """Delta_omega[Q]: full sampled degree on the diagonal, -1 on edges inside Q."""
    Q, qk, ia, ib = _window_positions(w, Q)
    both = ia & ib
    i = np.searchsorted(qk, w.ka[both])
    j = np.searchsorted(qk, w.kb[both])
    return _assemble(len(Q), i, j, w.degrees(Q), Q)


def boundary_defect(w, Q, R: int) -> SymMatrix:
    """D with Delta_{Gamma[Q]}[Q_R] = Delta_omega[Q_R] + D (diagonal, entries <= 0).

    The entry at x in Q_R is minus the number of sampled edges from x to G \\ Q.
    """
    Q, qk, ia, ib = _window_positions(w, Q)
    QR = core(w.model.group, Q, R)
    if len(QR) == 0:
        raise ValueError("Q_R is empty")
    rk = w.keys(QR)
    leaving = ia ^ ib
    inner = np.where(ia[leaving], w.ka[leaving], w.kb[leaving])
    inner.sort()
    cnt = np.searchsorted(inner, rk, side="right") - np.searchsorted(inner, rk, side="left")
    n = len(QR)
    M = sp.csr_matrix((-cnt.astype(np.float64), (np.arange(n), np.arange(n))), shape=(n, n))
    M.eliminate_zeros()
    return SymMatrix(M, QR)


def long_edge_part(w, U, R: int, with_remainder: bool = False):
    """L_omega[U]: -1 at sampled edges inside U of length > R, zero diagonal.

    With ``with_remainder`` also returns Delta_omega[U] - L_omega[U].
    """
    U, uk, ia, ib = _window_positions(w, U)
    sel = ia & ib & (w.lengths > R)
    i = np.searchsorted(uk, w.ka[sel])
    j = np.searchsorted(uk, w.kb[sel])
    L = _assemble(len(U), i, j, np.zeros(len(U)), U)
    if with_remainder:
        return L, restricted_laplacian(w, U) - L
    return L


# --------------------------------------------------------------------------
# inertia counting


def _as_csr(A) -> sp.csr_matrix:
    if isinstance(A, SymMatrix):
        return A.matrix
    if sp.issparse(A):
        return sp.csr_matrix(A)
    return sp.csr_matrix(np.asarray(A, dtype=np.float64))


def gershgorin(A: sp.csr_matrix) -> tuple[float, float]:
    d = A.diagonal()
    off = np.asarray(abs(A).sum(axis=1)).reshape(-1) - np.abs(d)
    if A.shape[0] == 0:
        return 0.0, 0.0
    return float(np.min(d - off)), float(np.max(d + off))


class InertiaCounter:
    """Counts eigenvalues below a shift via banded LDL^T of A - E*I.

    The matrix is reordered by reverse Cuthill-McKee once and stored in band
    form.  A (near-)zero pivot means the shift sits on an eigenvalue up to
    rounding; the shift is then nudged upward, so exact hits are counted as
    ``<= E``.
    """

    max_retries = 12

    def __init__(self, A):
        A = _as_csr(A)
        n = A.shape[0]
        self.n = n
        lo, hi = gershgorin(A)
        self.bounds = (lo, hi)
        self.scale = max(1.0, abs(lo), abs(hi))
        if n == 0:
            self.band = np.zeros((0, 1))
            return
        perm = reverse_cuthill_mckee(A, symmetric_mode=True)
        P = A[perm][:, perm].tocoo()
        low = P.row >= P.col
        r, c, v = P.row[low], P.col[low], P.data[low]
        k = int((r - c).max()) if len(r) else 0
        band = np.zeros((n, k + 1))
        band[c, r - c] = v
        self.band = band
        self.bandwidth = k

    def count_below(self, E: float) -> int:
        """#{eigenvalues < E}, with eigenvalues within rounding of E counted as below."""
        if self.n == 0:
            return 0
        tiny = 64 * EPS * self.scale
        shift = float(E)
        for attempt in range(self.max_retries):
            neg, ok = kernels.band_negcount(self.band, shift, tiny)
            if ok:
                return neg
            shift = float(E) + (2.0 ** attempt) * 1024 * EPS * self.scale
        raise SpectralError(f"LDL^T breakdown persisted near shift {E!r}")


def inertia_count(A, E: float) -> int:
    return InertiaCounter(A).count_below(E)


def bisect_eigenvalues(A, tol: float = BISECT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalue clusters of A localised to width ``tol`` by inertia bisection.

    Returns (locations, multiplicities); each location is the right end of an
    interval (a, b] with b - a <= tol holding that many eigenvalues.
    """
    ic = InertiaCounter(A)
    if ic.n == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    lo, hi = ic.bounds
    pad = 1e-6 * ic.scale
    a0, b0 = lo - pad, hi + pad
    locs, mults = [], []
    stack = [(a0, b0, ic.count_below(a0), ic.count_below(b0))]
    while stack:
        a, b, ca, cb = stack.pop()
        if cb == ca:
            continue
        if b - a <= tol:
            locs.append(b)
            mults.append(cb - ca)
            continue
        m = 0.5 * (a + b)
        cm = ic.count_below(m)
        stack.append((m, b, cm, cb))
        stack.append((a, m, ca, cm))
    order = np.argsort(locs)
    return np.asarray(locs)[order], np.asarray(mults, dtype=np.int64)[order]


# --------------------------------------------------------------------------
# counting functions


def _snap(x: np.ndarray) -> np.ndarray:
    return np.round(x / SNAP_GRID) * SNAP_GRID


def _cluster(locs: np.ndarray, mults: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    if len(locs) == 0:
        return locs, mults
    order = np.argsort(locs, kind="stable")
    locs, mults = locs[order], mults[order]
    starts = np.concatenate([[True], np.diff(locs) > tol])
    gid = np.cumsum(starts) - 1
    m = np.bincount(gid, weights=mults)
    centre = np.bincount(gid, weights=locs * mults) / m
    return _snap(centre), m


def component_blocks(A: sp.csr_matrix) -> list[np.ndarray]:
    """Index sets of the connected blocks of A's off-diagonal pattern."""
    n = A.shape[0]
    if n == 0:
        return []
    _, labels = connected_components(A, directed=False)
    order = np.argsort(labels, kind="stable")
    cuts = np.flatnonzero(np.diff(labels[order])) + 1
    return np.split(order, cuts)


def eigenvalues(A, dense_cutoff: int = DENSE_CUTOFF, bisect_tol: float = BISECT_TOL):
    """(locations, multiplicities) of all eigenvalues, block by block."""
    A = _as_csr(A)
    blocks = component_blocks(A)
    by_size: dict[int, list[np.ndarray]] = {}
    for b in blocks:
        by_size.setdefault(len(b), []).append(b)
    locs, mults = [], []
    for size, group in sorted(by_size.items()):
        if size <= dense_cutoff:
            if size == 1:
                idx = np.concatenate(group)
                ev = A.diagonal()[idx]
            else:
                idx = np.stack(group)
                dense = np.stack([A[g][:, g].toarray() for g in group])
                ev = np.linalg.eigvalsh(dense).reshape(-1)
            locs.append(_snap(ev))
            mults.append(np.ones(len(ev)))
        else:
            for g in group:
                l, m = bisect_eigenvalues(A[g][:, g], bisect_tol)
                locs.append(l)
                mults.append(m.astype(np.float64))
    if not locs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(locs), np.concatenate(mults)


def count_function(
    A,
    dense_cutoff: int = DENSE_CUTOFF,
    bisect_tol: float = BISECT_TOL,
    multiplicity_tol: float = MULTIPLICITY_TOL,
) -> StepFunction:
    """n(A)(E) = #{eigenvalues of A <= E}."""
    A = _as_csr(A)
    if A.shape[0] == 0:
        return StepFunction.zero()
    lo, hi = gershgorin(A)
    tol = multiplicity_tol * max(1.0, abs(lo), abs(hi))
    locs, mults = eigenvalues(A, dense_cutoff, bisect_tol)
    pts, m = _cluster(locs, mults, tol)
    return StepFunction(pts, np.cumsum(m))


def normalized_count(A, size: int | None = None, **kw) -> StepFunction:
    A = _as_csr(A)
    size = A.shape[0] if size is None else size
    f = count_function(A, **kw)
    return scale(f, 1.0 / size) if size else f


def F_R(w, Q, R: int, **kw) -> StepFunction:
    """n(Delta_omega[Q_R])."""
    QR = core(w.model.group, Q, R)
    if len(QR) == 0:
        return StepFunction.zero()
    return count_function(restricted_laplacian(w, QR), **kw)


def F_tilde_R(group, S: FiniteGraph, R: int, **kw) -> StepFunction:
    """n(Delta_S[(V_S)_R])."""
    L = graph_laplacian(S)
    if R == 0:
        return count_function(L, **kw)
    VR = core(group, S.vertices, R)
    if len(VR) == 0:
        return StepFunction.zero()
    return count_function(compress_to(L, VR), **kw)


def rank(A, tol: float | None = None) -> int:
    M = A.toarray() if isinstance(A, SymMatrix) else (A.toarray() if sp.issparse(A) else np.asarray(A))
    if M.size == 0:
        return 0
    ev = np.linalg.eigvalsh(M)
    tol = tol if tol is not None else M.shape[0] * EPS * max(1.0, float(np.abs(ev).max()))
    return int(np.sum(np.abs(ev) > tol))
