"""Translation occurrences of finite patterns and their analytic frequencies.

Matching is labelled: a translate ``S + x`` occurs in a window when its vertex
set lies in the window and the sampled induced graph on it equals ``S + x``
exactly (no isomorphism collapsing).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .geometry import _isin_sorted, as_vertex_set
from .percolation import PercolationModel, sample_window, truncation_radius
from .profiles import ProfileError
from .spectral import FiniteGraph


def _pairs(n: int) -> np.ndarray:
    return np.array(list(combinations(range(n), 2)), dtype=np.int64).reshape(-1, 2)


def all_graphs(vertices):
    """Every graph on a fixed vertex set, in binary order of the pair subsets."""
    V = as_vertex_set(vertices)
    pairs = _pairs(len(V))
    for mask in range(1 << len(pairs)):
        sel = [(mask >> i) & 1 for i in range(len(pairs))]
        yield FiniteGraph(V, pairs[np.array(sel, dtype=bool)] if len(pairs) else pairs)


class _EdgeLookup:
    def __init__(self, w):
        self.size = w.indexer.size
        if self.size >= 1 << 31:
            raise ValueError("window too large for the edge lookup")
        self.codes = np.sort(w.ka * self.size + w.kb)

    def present(self, ka, kb) -> np.ndarray:
        lo = np.minimum(ka, kb)
        hi = np.maximum(ka, kb)
        return _isin_sorted(lo * self.size + hi, self.codes)


def _match_mask(w, S: FiniteGraph, Q) -> tuple[np.ndarray, np.ndarray]:
    """Translations x (anchored at S's first vertex) and whether S + x occurs."""
    Q = as_vertex_set(Q, w.window.shape[1])
    V = S.vertices
    if len(V) == 0:
        raise ValueError("pattern needs at least one vertex")
    qk = w.keys(Q)
    xs = Q - V[0]
    keys = []
    ok = np.ones(len(xs), dtype=bool)
    for v in V:
        pts = xs + v
        inside = w.indexer.inside(pts)
        k = np.where(inside, w.indexer.encode(np.where(inside[:, None], pts, Q[:1])), -1)
        ok &= inside & _isin_sorted(k, qk)
        keys.append(k)
    xs = xs[ok]
    keys = [k[ok] for k in keys]
    lookup = _EdgeLookup(w)
    edge_set = {(int(i), int(j)) for i, j in S.edges}
    for i, j in _pairs(len(V)):
        present = lookup.present(keys[i], keys[j])
        want = (int(i), int(j)) in edge_set
        ok_pair = present if want else ~present
        xs, keys = xs[ok_pair], [k[ok_pair] for k in keys]
    return xs, np.stack(keys, axis=1) if keys else np.zeros((0, 0), dtype=np.int64)


def occurrence_anchors(w, S: FiniteGraph, Q) -> np.ndarray:
    return _match_mask(w, S, Q)[0]


def isolated_anchors(w, S: FiniteGraph, Q, R: int) -> np.ndarray:
    xs, keys = _match_mask(w, S, Q)
    if len(xs) == 0:
        return xs
    g = w.model.group
    a, b = S.edge_coords()
    internal_long = int(np.sum(g.norms(b - a) >= R)) if S.num_edges else 0
    min_len = max(R, 1)
    sel = w.lengths >= min_len
    ends = np.sort(np.concatenate([w.ka[sel], w.kb[sel]]))
    deg = np.searchsorted(ends, keys, side="right") - np.searchsorted(ends, keys, side="left")
    leaving = deg.sum(axis=1) - 2 * internal_long
    return xs[leaving == 0]


def count_occurrences(w, S: FiniteGraph, Q) -> int:
    """Number of translates S + x inside Q whose sampled induced graph is S + x."""
    return len(occurrence_anchors(w, S, Q))


def count_isolated(w, S: FiniteGraph, Q, R: int) -> int:
    """Occurrences with no sampled edge of length >= R leaving the translate."""
    return len(isolated_anchors(w, S, Q, R))


# --------------------------------------------------------------------------
# analytic products


def plain_frequency(m: PercolationModel, S: FiniteGraph) -> float:
    """nu_S: product of p over edges and (1 - p) over non-edges of S."""
    pairs = _pairs(S.num_vertices)
    if len(pairs) == 0:
        return 1.0
    V = S.vertices
    p = m.p_shell(m.group.norms(V[pairs[:, 1]] - V[pairs[:, 0]]))
    is_edge = np.zeros(len(pairs), dtype=bool)
    if S.num_edges:
        codes = pairs[:, 0] * len(V) + pairs[:, 1]
        is_edge = np.isin(codes, S.edges[:, 0] * len(V) + S.edges[:, 1])
    return float(np.prod(np.where(is_edge, p, 1.0 - p)))


def analytic_frequency(m: PercolationModel, S: FiniteGraph, mode="plain", tol: float = 1e-10):
    """(value, error_bound) of nu_S (``mode='plain'``) or nu_{S,R} (``mode=('isolated', R)``).

    The isolated product over leaving pairs runs over shells up to a cutoff;
    beyond it log(1 - p) >= -2p (p <= 1/2) bounds the missing factor.
    """
    base = plain_frequency(m, S)
    if mode == "plain":
        return base, 0.0
    kind, R = mode
    if kind != "isolated":
        raise ValueError(f"unknown mode {mode!r}")
    R = int(R)
    n = S.num_vertices
    start = max(R, 1)
    K = m.cutoff_for(tol / (2 * n), start=start - 1)
    while m.profile.sup_beyond(K) > 0.5:
        K += 1
        if K > m.group.max_radius:
            raise ProfileError("cannot certify the isolation product (p > 1/2 on far shells)")
    if base == 0.0:
        return 0.0, 0.0
    ks = np.arange(start, K + 1)
    sizes = m.group.sphere_sizes(K)[start : K + 1]
    p = m.p_shell(ks)
    if np.any((p >= 1) & (sizes > 0)):
        return 0.0, 0.0
    per_vertex = float(np.sum(sizes * np.log1p(-p)))
    # remove pairs that stay inside V_S
    V = S.vertices
    inside = 0.0
    if n > 1:
        diffs = (V[:, None, :] - V[None, :, :]).reshape(-1, V.shape[1])
        d = m.group.norms(diffs)
        ok = (d >= start) & (d <= K)
        inside = float(np.sum(np.log1p(-m.p_shell(d[ok]))))
    logv = n * per_vertex - inside
    value = base * math.exp(logv)
    tail = m.tail_bound(K)
    err = value * (1.0 - math.exp(-2.0 * n * tail))
    if err > tol:
        raise ProfileError("isolation product error exceeds tolerance")
    return value, err


# --------------------------------------------------------------------------
# empirical frequencies


@dataclass
class FrequencyReport:
    pattern: FiniteGraph
    mode: object
    window_sizes: list[int]
    counts: list[int]
    ratios: list[float]
    analytic: float
    error_bound: float
    sigma: float = float("nan")
    truncation_bias: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        gap = abs(self.ratios[-1] - self.analytic)
        return gap <= 3 * self.sigma + self.error_bound + self.truncation_bias

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("window_size,count,ratio,analytic,error_bound\n")
            for n, c, r in zip(self.window_sizes, self.counts, self.ratios):
                fh.write(f"{n},{c},{format(r, '.17g')},{format(self.analytic, '.17g')},"
                         f"{format(self.error_bound, '.17g')}\n")


def block_bootstrap_sigma(anchor_pts, Q, block_side: int, seed: int, resamples: int = 2000) -> float:
    """Standard error of the occurrence ratio from resampling disjoint blocks of Q.

    Q must be a box; blocks are the full cubes of side ``block_side`` on the
    grid anchored at Q's lower corner.  Each occurrence is credited to the
    block holding its anchor; occurrences in leftover slabs are dropped.
    """
    Q = as_vertex_set(Q)
    d = Q.shape[1]
    lo, hi = Q.min(axis=0), Q.max(axis=0)
    dims = (hi - lo + 1) // block_side
    if np.prod(dims) < 2:
        return float("nan")
    cell = np.floor_divide(np.asarray(anchor_pts).reshape(-1, d) - lo, block_side)
    ok = np.all(cell < dims, axis=1)
    counts = np.zeros(int(np.prod(dims)), dtype=np.float64)
    np.add.at(counts, np.ravel_multi_index(cell[ok].T, dims), 1.0)
    ratios = counts / block_side ** d
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(ratios), size=(resamples, len(ratios)))
    return float(ratios[idx].mean(axis=1).std(ddof=1))


def empirical_frequency(seed: int, m: PercolationModel, S: FiniteGraph, mode, boxes,
                        count: int | None = None, block_side: int | None = None,
                        tol: float = 1e-10) -> FrequencyReport:
    """Occurrence ratios of S along the box sequence for one configuration.

    The CI for the largest window is a block bootstrap (occurrences within
    diam S are dependent), so the 3-sigma check is heuristic.
    """
    count = len(boxes) if count is None else count
    R_max = truncation_radius(m)
    windows = [boxes.box(j) for j in range(1, count + 1)]
    big = sample_window(seed, m, windows[-1], R_max)
    analytic, err = analytic_frequency(m, S, mode, tol)
    sizes, counts, ratios = [], [], []
    last_anchors = None
    for Q in windows:
        w = big.restrict(Q)
        if mode == "plain":
            anchors = occurrence_anchors(w, S, Q)
        else:
            anchors = isolated_anchors(w, S, Q, mode[1])
        sizes.append(len(Q))
        counts.append(len(anchors))
        ratios.append(len(anchors) / len(Q))
        last_anchors = anchors + S.vertices[0]
    side = boxes.side(count)
    if block_side is None:
        block_side = max(1, int(round(side / 100 ** (1 / m.group.dimension))))
    sigma = block_bootstrap_sigma(last_anchors, windows[-1], block_side, seed)
    bias = 0.0 if mode == "plain" else float(S.num_vertices * big.bias_bound / len(windows[-1]))
    return FrequencyReport(S, mode, sizes, counts, ratios, analytic, err, sigma, bias,
                           ["block-bootstrap CI; occurrences within diam(S) are dependent"])
