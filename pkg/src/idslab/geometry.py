"""Word-metric geometry of Z^d with a finite symmetric generating set.

Vertex sets are plain ``(n, d)`` int64 arrays kept sorted lexicographically and
duplicate free (see :func:`as_vertex_set`).  Set operations go through a
row-major integer encoding of a bounding box, which preserves that order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb, gcd

import numpy as np


class GeometryError(ValueError):
    """Invalid group or a query outside the memoised radius."""


def as_vertex_set(points, dim: int | None = None) -> np.ndarray:
    """Sorted, duplicate-free ``(n, d)`` int64 array."""
    arr = np.asarray(points, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(-1, dim)
    if arr.size == 0:
        d = dim if dim is not None else (arr.shape[1] if arr.ndim == 2 else 1)
        return np.zeros((0, d), dtype=np.int64)
    return np.unique(arr, axis=0)


class Indexer:
    """Row-major encoding of the integer box ``lo <= x <= hi`` (inclusive)."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=np.int64)
        self.hi = np.asarray(hi, dtype=np.int64)
        self.shape = tuple(int(s) for s in self.hi - self.lo + 1)
        strides = np.ones(len(self.shape), dtype=np.int64)
        for i in range(len(self.shape) - 2, -1, -1):
            strides[i] = strides[i + 1] * self.shape[i + 1]
        self.strides = strides
        self.size = int(np.prod(self.shape, dtype=np.int64))

    @classmethod
    def covering(cls, *point_sets, pad: int = 0) -> "Indexer":
        pts = np.concatenate([np.asarray(p, dtype=np.int64) for p in point_sets if len(p)], axis=0)
        return cls(pts.min(axis=0) - pad, pts.max(axis=0) + pad)

    def inside(self, pts: np.ndarray) -> np.ndarray:
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)

    def encode(self, pts: np.ndarray) -> np.ndarray:
        return ((np.asarray(pts, dtype=np.int64) - self.lo) * self.strides).sum(axis=-1)

    def decode(self, keys: np.ndarray) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        out = np.empty((keys.shape[0], len(self.shape)), dtype=np.int64)
        rem = keys.copy()
        for i, s in enumerate(self.strides):
            out[:, i] = rem // s
            rem = rem - out[:, i] * s
        return out + self.lo


def _isin_sorted(keys: np.ndarray, sorted_ref: np.ndarray) -> np.ndarray:
    if sorted_ref.size == 0:
        return np.zeros(keys.shape, dtype=bool)
    pos = np.searchsorted(sorted_ref, keys)
    pos = np.minimum(pos, sorted_ref.size - 1)
    return sorted_ref[pos] == keys


def _int_det(rows: list[list[int]]) -> int:
    m = [[Fraction(v) for v in r] for r in rows]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            return 0
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            for k in range(c, n):
                m[r][k] -= f * m[c][k]
    return int(det)


def standard_generators(dim: int) -> list[tuple[int, ...]]:
    gens = []
    for i in range(dim):
        e = [0] * dim
        e[i] = 1
        gens.append(tuple(e))
        e[i] = -1
        gens.append(tuple(e))
    return gens


@dataclass
class LatticeGroup:
    """Z^d with a symmetric generating set and memoised word-metric shells.

    Distances are tabulated by breadth-first search up to ``max_radius`` at
    construction; queries beyond it raise :class:`GeometryError`.
    """

    dimension: int
    generators: list[tuple[int, ...]] | None = None
    max_radius: int = 64
    _table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = int(self.dimension)
        if d < 1:
            raise GeometryError("dimension must be positive")
        gens = standard_generators(d) if self.generators is None else self.generators
        gens = sorted({tuple(int(c) for c in g) for g in gens})
        for g in gens:
            if len(g) != d:
                raise GeometryError(f"generator {g} has wrong dimension")
            if not any(g):
                raise GeometryError("identity is not allowed as a generator")
        gset = set(gens)
        for g in gens:
            if tuple(-c for c in g) not in gset:
                raise GeometryError(f"generator set is not symmetric: missing inverse of {g}")
        if len(gens) < d:
            raise GeometryError("not generating: fewer generators than the dimension")
        index = 0
        for combo in combinations(gens, d):
            index = gcd(index, abs(_int_det([list(v) for v in combo])))
            if index == 1:
                break
        if index != 1:
            raise GeometryError("not generating: generated subgroup has index != 1 in Z^d")
        self.generators = gens
        self._gen_array = np.array(gens, dtype=np.int64)
        self.gen_inf = int(np.abs(self._gen_array).max())
        self._build_table()

    def _build_table(self):
        reach = self.gen_inf * self.max_radius
        d = self.dimension
        self._box = Indexer([-reach] * d, [reach] * d)
        table = np.full(self._box.size, -1, dtype=np.int32)
        origin = self._box.encode(np.zeros((1, d), dtype=np.int64))
        table[origin] = 0
        frontier = np.zeros((1, d), dtype=np.int64)
        shells = [frontier]
        for r in range(1, self.max_radius + 1):
            cand = (frontier[:, None, :] + self._gen_array[None, :, :]).reshape(-1, d)
            cand = cand[self._box.inside(cand)]
            keys = np.unique(self._box.encode(cand))
            keys = keys[table[keys] < 0]
            table[keys] = r
            frontier = self._box.decode(keys)
            shells.append(frontier)
        self._table = table
        self._shells = shells
        self.shell_sizes = np.array([len(s) for s in shells], dtype=np.int64)

    # -- metric -----------------------------------------------------------

    def norms(self, vecs) -> np.ndarray:
        """Word length of each row of ``vecs``."""
        v = np.asarray(vecs, dtype=np.int64).reshape(-1, self.dimension)
        if self.is_standard:
            return np.abs(v).sum(axis=1)
        ok = self._box.inside(v)
        out = np.full(v.shape[0], -1, dtype=np.int64)
        out[ok] = self._table[self._box.encode(v[ok])]
        if np.any(out < 0):
            bad = v[np.argmax(out < 0)]
            raise GeometryError(
                f"distance of {tuple(bad)} exceeds memoised radius {self.max_radius}; "
                "raise max_radius"
            )
        return out

    def norm(self, x) -> int:
        return int(self.norms(np.asarray(x, dtype=np.int64).reshape(1, -1))[0])

    def shell(self, k: int) -> np.ndarray:
        """Lexicographically sorted points at word length exactly ``k``."""
        self._check_radius(k)
        return self._shells[k]

    def ball_offsets(self, R: int) -> np.ndarray:
        if R > self.max_radius and self.is_standard:
            # l1 ball beyond the memoised shells
            axes = [np.arange(-R, R + 1, dtype=np.int64)] * self.dimension
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dimension)
            return as_vertex_set(grid[np.abs(grid).sum(axis=1) <= R])
        self._check_radius(R)
        return as_vertex_set(np.concatenate(self._shells[: R + 1], axis=0))

    def ball_size(self, R: int) -> int:
        self._check_radius(R)
        return int(self.shell_sizes[: R + 1].sum())

    @property
    def is_standard(self) -> bool:
        if not hasattr(self, "_standard"):
            self._standard = sorted(self.generators) == sorted(standard_generators(self.dimension))
        return self._standard

    def sphere_sizes(self, kmax: int) -> np.ndarray:
        """|S_k| for k = 0..kmax.

        Memoised shells are used up to ``max_radius``; beyond that only the
        standard generators are supported, through the closed form
        |S_k| = sum_i 2^i C(d, i) C(k-1, i-1).
        """
        if kmax <= self.max_radius:
            return self.shell_sizes[: kmax + 1]
        if not self.is_standard:
            raise GeometryError(
                f"sphere sizes beyond memoised radius {self.max_radius} need standard generators; "
                "raise max_radius"
            )
        d = self.dimension
        k = np.arange(self.max_radius + 1, kmax + 1, dtype=np.float64)
        extra = np.zeros_like(k)
        for i in range(1, d + 1):
            # C(k-1, i-1) as a float polynomial in k
            term = np.ones_like(k)
            for j in range(i - 1):
                term *= (k - 1 - j) / (j + 1)
            extra += 2.0 ** i * comb(d, i) * term
        return np.concatenate([self.shell_sizes.astype(np.float64), extra])

    def ball_size_bound(self, k) -> np.ndarray:
        """Upper bound on |B_k| valid for every k (no memoisation needed)."""
        k = np.asarray(k, dtype=np.float64)
        return (2.0 * self.gen_inf * k + 1.0) ** self.dimension

    def _check_radius(self, R: int):
        if R < 0:
            raise GeometryError("radius must be nonnegative")
        if R > self.max_radius:
            raise GeometryError(f"radius {R} exceeds memoised radius {self.max_radius}")


def word_distance(g: LatticeGroup, x, y) -> int:
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    return g.norm(x - y)


def ball(g: LatticeGroup, center, R: int) -> np.ndarray:
    c = np.asarray(center, dtype=np.int64).reshape(1, -1)
    return g.ball_offsets(R) + c


def dilate(g: LatticeGroup, Q: np.ndarray, R: int) -> np.ndarray:
    offs = g.ball_offsets(R)
    return as_vertex_set((Q[:, None, :] + offs[None, :, :]).reshape(-1, g.dimension))


BOUNDARY_KINDS = ("interior", "exterior", "both", "core")


def boundary(g: LatticeGroup, Q, R: int, kind: str = "both") -> np.ndarray:
    """R-boundaries of a finite set: interior, exterior, their union, or the core."""
    if kind not in BOUNDARY_KINDS:
        raise ValueError(f"kind must be one of {BOUNDARY_KINDS}")
    Q = as_vertex_set(Q, g.dimension)
    if len(Q) == 0:
        raise ValueError("boundary of an empty set")
    if R == 0:
        empty = Q[:0]
        return {"interior": empty, "exterior": empty, "both": empty, "core": Q}[kind]
    offs = g.ball_offsets(R)
    idx = Indexer.covering(Q, pad=g.gen_inf * R)
    qkeys = idx.encode(Q)  # sorted because Q is
    interior = np.zeros(len(Q), dtype=bool)
    ext_keys = []
    for o in offs:
        k = idx.encode(Q + o)
        miss = ~_isin_sorted(k, qkeys)
        interior |= miss
        if kind in ("exterior", "both"):
            ext_keys.append(k[miss])
    if kind == "interior":
        return Q[interior]
    if kind == "core":
        return Q[~interior]
    ext = idx.decode(np.unique(np.concatenate(ext_keys))) if ext_keys else Q[:0]
    if kind == "exterior":
        return ext
    return as_vertex_set(np.concatenate([Q[interior], ext], axis=0))


def core(g: LatticeGroup, Q, R: int) -> np.ndarray:
    """Q_R = Q minus its R-boundary (Q itself for R = 0)."""
    return boundary(g, Q, R, "core") if R > 0 else as_vertex_set(Q, g.dimension)


def diameter(g: LatticeGroup, Q) -> int:
    Q = as_vertex_set(Q, g.dimension)
    diffs = as_vertex_set((Q[:, None, :] - Q[None, :, :]).reshape(-1, g.dimension))
    return int(g.norms(diffs).max())


def box(side: int, dim: int, origin=None) -> np.ndarray:
    """{0, ..., side-1}^dim (+ origin), lexicographically sorted."""
    grids = np.meshgrid(*[np.arange(side, dtype=np.int64)] * dim, indexing="ij")
    pts = np.stack([gr.reshape(-1) for gr in grids], axis=1)
    if origin is not None:
        pts = pts + np.asarray(origin, dtype=np.int64)
    return pts


def is_box(Q: np.ndarray) -> bool:
    if len(Q) == 0:
        return False
    lo, hi = Q.min(axis=0), Q.max(axis=0)
    return int(np.prod(hi - lo + 1)) == len(Q)


@dataclass
class FolnerBoxSequence:
    """Nested monotile boxes {0..L_n-1}^d with strictly increasing sides.

    Sides default to ``L_n = n * L0``; an explicit list may be passed instead.
    Indexing is 1-based to match the usual Q_1, Q_2, ...
    """

    group: LatticeGroup
    side_lengths: list[int]

    def __post_init__(self):
        sides = [int(s) for s in self.side_lengths]
        if not sides or sides[0] < 1 or any(b <= a for a, b in zip(sides, sides[1:])):
            raise ValueError("side lengths must be positive and strictly increasing")
        self.side_lengths = sides

    @classmethod
    def arithmetic(cls, group: LatticeGroup, L0: int, count: int) -> "FolnerBoxSequence":
        return cls(group, [n * L0 for n in range(1, count + 1)])

    def __len__(self):
        return len(self.side_lengths)

    def side(self, n: int) -> int:
        return self.side_lengths[n - 1]

    def box(self, n: int) -> np.ndarray:
        return box(self.side(n), self.group.dimension)

    def boundary_ratio(self, n: int, R: int) -> float:
        Qn = self.box(n)
        return len(boundary(self.group, Qn, R, "both")) / len(Qn)


def tiling_partition(g: LatticeGroup, tile: np.ndarray, shift, window) -> tuple[np.ndarray, np.ndarray]:
    """Split the translates ``tile + shift + L*Z^d`` meeting ``window``.

    ``tile`` must be a box of side L anchored at the origin.  Returns the
    translation vectors of the translates inside the window and of those
    straddling its boundary, both sorted.
    """
    tile = as_vertex_set(tile, g.dimension)
    if not is_box(tile) or np.any(tile.min(axis=0) != 0):
        raise ValueError("tile must be a box {0..L-1}^d anchored at the origin")
    L = int(tile.max(axis=0)[0]) + 1
    if np.any(tile.max(axis=0) != L - 1):
        raise ValueError("tile must be a cube")
    shift = np.asarray(shift, dtype=np.int64).reshape(1, -1)
    W = as_vertex_set(window, g.dimension)
    anchors = shift + L * np.floor_divide(W - shift, L)
    ts, counts = np.unique(anchors, axis=0, return_counts=True)
    full = counts == L ** g.dimension
    return ts[full], ts[~full]
