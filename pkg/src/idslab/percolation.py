"""Long-range percolation on Z^d: model constants, hashing sampler, census.

One logical configuration omega is fixed by a 64-bit seed: the edge [x, y] is
open iff ``u(x, y) < p(x - y)`` with ``u`` the SplitMix64-finalised FNV-1a hash
of the canonically ordered endpoints.  Every window sampled with the same seed
therefore sees the same omega.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import Indexer, LatticeGroup, _isin_sorted, as_vertex_set, box, is_box
from .profiles import INF, Coupling, Growth, InverseCoupling, ProfileError, Table

E_MINUS_1 = math.e - 1.0


MAX_CANDIDATES = 10_000_000


class TruncationError(ValueError):
    """epsilon(R_max) exceeds the model's tail tolerance."""


class CapabilityError(RuntimeError):
    """Request beyond what the configured backend supports."""


@dataclass
class PercolationModel:
    """Radial edge probabilities p(x) = min(profile(|x|), p_max), p(0) = 0."""

    group: LatticeGroup
    profile: object
    p_max: float = 1.0
    tail_tol: float = 1e-8
    growth: Growth = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.p_max <= 1:
            raise ProfileError("p_max must lie in (0, 1]")
        if self.tail_tol <= 0:
            raise ProfileError("tail_tol must be positive")
        self.growth = Growth(self.group.gen_inf, self.group.dimension)
        ks = np.arange(1, self.group.max_radius + 1)
        raw = self.profile(ks)
        if np.any(raw < 0):
            raise ProfileError("profile takes negative values")
        if self.p_max >= 1 and np.any(raw > 1) and not isinstance(self.profile, Coupling):
            raise ProfileError("profile exceeds 1; lower its amplitude or set p_max")
        self._cutoff_cache: dict = {}
        # summability certificate: some finite cutoff must bound the tail
        self.cutoff_for(INF_TOL)

    # -- pointwise ---------------------------------------------------------

    def p_shell(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        vals = np.minimum(self.profile(np.maximum(k, 1)), self.p_max)
        return np.where(k == 0, 0.0, vals)

    def p_value(self, x) -> float:
        return float(self.p_shell(self.group.norm(x)))

    def strictly_mixed(self, radius: int) -> bool:
        """0 < p < 1 on every shell 1..radius (atom characterisation precondition)."""
        p = self.p_shell(np.arange(1, radius + 1))
        return bool(np.all((p > 0) & (p < 1)))

    # -- tails -------------------------------------------------------------

    def tail_bound(self, K: int) -> float:
        """Certified upper bound on sum_{|y| > K} p(y)."""
        return self.profile.tail_bound(K, self.growth)

    def cutoff_for(self, tol: float, start: int = 0) -> int:
        """Smallest cutoff K >= start whose tail bound is <= tol.

        Tail bounds are nonincreasing in K, so an exponential then binary
        search suffices.  Cutoffs beyond the memoised radius are allowed when
        the group has closed-form sphere sizes.
        """
        key = (tol, start)
        if key in self._cutoff_cache:
            return self._cutoff_cache[key]
        limit = max(self.group.max_radius, MAX_CUTOFF if self.group.is_standard else 0)
        if self.tail_bound(start) <= tol:
            K = start
        else:
            lo, hi = start, max(start + 1, 1)
            while self.tail_bound(hi) > tol:
                lo, hi = hi, 2 * hi
                if lo > limit:
                    raise ProfileError(
                        f"cannot certify tail <= {tol:g} below radius {limit}"
                        " (profile not summable or max_radius too small)"
                    )
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if self.tail_bound(mid) <= tol:
                    hi = mid
                else:
                    lo = mid
            K = hi
        if K > limit:
            raise ProfileError(f"cannot certify tail <= {tol:g} below radius {limit}")
        self._cutoff_cache[key] = K
        return K

    def shell_sum(self, fn, R: int, tol: float | None = None) -> tuple[float, int]:
        """sum_{R < k <= K} s_k fn(p_k) with K the cutoff for ``tol``."""
        tol = self.tail_tol if tol is None else tol
        K = self.cutoff_for(tol, start=R)
        sizes = self.group.sphere_sizes(K)[R + 1 : K + 1]
        ks = np.arange(R + 1, K + 1)
        return float(np.sum(sizes * fn(self.p_shell(ks)))), K

    def epsilon_bounds(self, R: int, tol: float | None = None) -> tuple[float, float]:
        """Lower and upper bounds on epsilon(R) with gap <= tol (default tail_tol)."""
        tol = self.tail_tol if tol is None else tol
        partial, K = self.shell_sum(lambda p: p, R, tol)
        return partial, partial + self.tail_bound(K)

    def spec(self) -> dict:
        return {
            "dimension": self.group.dimension,
            "generators": [list(g) for g in self.group.generators],
            **self.profile.spec(),
            "p_max": self.p_max,
            "tail_tol": self.tail_tol,
        }


INF_TOL = 1e300
MAX_CUTOFF = 1 << 22


def p_value(m: PercolationModel, x) -> float:
    return m.p_value(x)


def epsilon_tail(m: PercolationModel, R: int) -> float:
    """Certified upper value of epsilon(R) = sum_{|y| > R} p(y), error <= tail_tol."""
    if R < 0:
        raise ValueError("R must be nonnegative")
    return m.epsilon_bounds(R)[1]


def moment_constants(m: PercolationModel) -> tuple[float, float]:
    """(c, tau) with c = prod_y (1 + p(y)(e - 1)) (upper certified) and tau = 6c."""
    logsum, K = m.shell_sum(lambda p: np.log1p(p * E_MINUS_1), 0)
    # log(1 + z) <= z for the remainder
    c = math.exp(logsum + E_MINUS_1 * m.tail_bound(K))
    return c, 6.0 * c


def _tail_t2(T: int) -> float:
    """sum_{t > T} t^2 e^{-t}."""
    x = math.exp(-1.0)
    total = x * (1 + x) / (1 - x) ** 3
    return total - sum(t * t * math.exp(-t) for t in range(1, T + 1))


def bernstein_T(c: float) -> int:
    T = 1
    while _tail_t2(T) > 1.0 / (3.0 * c):
        T += 1
    return T


def r_zero_threshold(c: float) -> float:
    T = bernstein_T(c)
    s = sum(t * t for t in range(1, T + 1))
    return -0.5 * math.log1p(-1.0 / (3.0 * s))


def r_zero(m: PercolationModel) -> int:
    """Least R >= 1 with epsilon(R) below the Bernstein-moment threshold."""
    c, _ = moment_constants(m)
    thr = r_zero_threshold(c)
    R = 1
    while True:
        lo, hi = m.epsilon_bounds(R, tol=min(m.tail_tol, thr / 4))
        if hi <= thr:
            return R
        R += 1


def coupling_to_p(group: LatticeGroup, J, beta: float, **kwargs) -> PercolationModel:
    """Model with p = 1 - exp(-beta * J); J must have a certifiable finite sum."""
    model = PercolationModel(group, Coupling(J, beta), **kwargs)
    return model


def p_to_coupling(m: PercolationModel, beta: float) -> InverseCoupling:
    """Radial coupling J with 1 - exp(-beta J) = p; callable on word distances."""
    if m.p_max < 1:
        raise ProfileError("p_to_coupling needs an uncapped model (p_max = 1)")
    J = InverseCoupling(m.profile, beta)
    K = 0
    while J.tail_bound(K, m.growth) == INF:
        K += 1
        if K > m.group.max_radius:
            raise ProfileError("coupling sum cannot be certified finite")
    return J


# --------------------------------------------------------------------------
# sampling


def edge_indicator(seed: int, x, y, m: PercolationModel) -> bool:
    x = tuple(int(c) for c in np.asarray(x).reshape(-1))
    y = tuple(int(c) for c in np.asarray(y).reshape(-1))
    if x == y:
        raise ValueError("no self-loops")
    a, b = (x, y) if x < y else (y, x)
    p = m.p_value(np.subtract(x, y))
    return kernels.uniform_scalar(seed, a, b) < p


def candidate_pairs(m: PercolationModel, Q: np.ndarray, R_max: int, min_length: int = 1):
    """Unordered pairs [x, y] with x in Q, min_length <= d(x, y) <= R_max, p > 0.

    Returns canonical endpoints ``a < b`` (lexicographic), lengths, probabilities,
    each pair listed once.
    """
    g = m.group
    n_off = int(g.sphere_sizes(R_max).sum())  # GeometryError past the memoised radius
    if len(Q) * n_off > MAX_CANDIDATES:
        raise CapabilityError(
            f"{len(Q)} sites x ball of radius {R_max} exceeds {MAX_CANDIDATES} candidate pairs; "
            "use a smaller window, a faster-decaying profile or a larger tail_tol"
        )
    offs = g.ball_offsets(R_max)
    lens = g.norms(offs)
    probs = m.p_shell(lens)
    keep = (lens >= min_length) & (probs > 0)
    offs, lens, probs = offs[keep], lens[keep], probs[keep]
    d = g.dimension
    if len(Q) == 0 or len(offs) == 0:
        z = np.zeros((0, d), dtype=np.int64)
        return z, z, np.zeros(0, np.int64), np.zeros(0)
    idx = Indexer.covering(Q, pad=g.gen_inf * R_max)
    qkeys = idx.encode(Q)
    xs = np.repeat(Q, len(offs), axis=0)
    ys = (Q[:, None, :] + offs[None, :, :]).reshape(-1, d)
    kx = np.repeat(qkeys, len(offs))
    ky = idx.encode(ys)
    y_in = _isin_sorted(ky, qkeys)
    keep = ~y_in | (kx < ky)
    xs, ys, kx, ky = xs[keep], ys[keep], kx[keep], ky[keep]
    L = np.tile(lens, len(Q))[keep]
    P = np.tile(probs, len(Q))[keep]
    swap = ky < kx
    a = np.where(swap[:, None], ys, xs)
    b = np.where(swap[:, None], xs, ys)
    ka = np.where(swap, ky, kx)
    kb = np.where(swap, kx, ky)
    order = np.lexsort((kb, ka))
    return a[order], b[order], L[order], P[order]


@dataclass
class WindowGraph:
    """Sampled edges with at least one endpoint in ``window``, length <= rmax."""

    model: PercolationModel
    window: np.ndarray
    rmax: int
    seed: int
    a: np.ndarray
    b: np.ndarray
    lengths: np.ndarray
    bias_bound: float

    def __post_init__(self):
        self._indexer = Indexer.covering(self.window, pad=self.model.group.gen_inf * self.rmax)
        self._wkeys = self._indexer.encode(self.window)
        self.ka = self._indexer.encode(self.a)
        self.kb = self._indexer.encode(self.b)

    @property
    def num_edges(self) -> int:
        return len(self.lengths)

    @property
    def indexer(self) -> Indexer:
        return self._indexer

    def keys(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, self.window.shape[1])
        if not np.all(self._indexer.inside(pts)):
            raise ValueError("points outside the sampled region")
        return self._indexer.encode(pts)

    def contains_window(self, Q) -> bool:
        return bool(np.all(_isin_sorted(self.keys(Q), self._wkeys)))

    def edges_touching(self, Q, both: bool = False) -> np.ndarray:
        """Boolean mask of edges with one (or both) endpoint(s) in Q."""
        qk = np.sort(self.keys(Q))
        ia = _isin_sorted(self.ka, qk)
        ib = _isin_sorted(self.kb, qk)
        return (ia & ib) if both else (ia | ib)

    def degrees(self, Q, min_length: int = 1) -> np.ndarray:
        """Sampled degree of each point of Q counting edges of length >= min_length."""
        qk = self.keys(Q)
        sel = self.lengths >= min_length
        ends = np.concatenate([self.ka[sel], self.kb[sel]])
        ends.sort()
        return np.searchsorted(ends, qk, side="right") - np.searchsorted(ends, qk, side="left")

    def neighbors(self, x) -> np.ndarray:
        k = self.keys(x)[0]
        nb = np.concatenate([self.b[self.ka == k], self.a[self.kb == k]])
        return as_vertex_set(nb, self.window.shape[1])

    def census(self, Q) -> np.ndarray:
        """counts[i, l-1] = number of sampled edges of length l at the i-th point of Q."""
        qk = self.keys(Q)
        out = np.zeros((len(qk), self.rmax), dtype=np.int64)
        pos = {int(k): i for i, k in enumerate(qk)}
        for ka, kb, length in zip(self.ka, self.kb, self.lengths):
            for k in (ka, kb):
                i = pos.get(int(k))
                if i is not None:
                    out[i, length - 1] += 1
        return out

    def restrict(self, Q) -> "WindowGraph":
        Q = as_vertex_set(Q, self.window.shape[1])
        if not self.contains_window(Q):
            raise ValueError("restriction window must lie inside the sampled window")
        mask = self.edges_touching(Q)
        eps = epsilon_tail(self.model, self.rmax)
        return WindowGraph(self.model, Q, self.rmax, self.seed, self.a[mask], self.b[mask],
                           self.lengths[mask], len(Q) * eps)

    # -- serialisation -----------------------------------------------------

    def window_spec(self) -> str:
        W = self.window
        if is_box(W):
            lo, hi = W.min(axis=0), W.max(axis=0)
            return "box:" + ",".join(map(str, lo)) + ":" + ",".join(map(str, hi))
        return "set:" + "|".join(",".join(map(str, p)) for p in W)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# seed={int(self.seed) & ((1 << 64) - 1)} rmax={self.rmax} window={self.window_spec()}\n")
            for pa, pb in zip(self.a, self.b):
                fh.write(",".join(map(str, pa)) + ";" + ",".join(map(str, pb)) + "\n")


def parse_window_spec(spec: str) -> np.ndarray:
    kind, _, rest = spec.partition(":")
    if kind == "box":
        lo_s, hi_s = rest.split(":")
        lo = np.array([int(v) for v in lo_s.split(",")])
        hi = np.array([int(v) for v in hi_s.split(",")])
        side = hi - lo + 1
        grids = np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(lo, hi)], indexing="ij")
        return np.stack([gr.reshape(-1) for gr in grids], axis=1).astype(np.int64)
    if kind == "set":
        return as_vertex_set([[int(v) for v in p.split(",")] for p in rest.split("|")])
    raise ValueError(f"bad window spec {spec!r}")


def read_window_csv(path) -> tuple[dict, np.ndarray, np.ndarray]:
    """Header fields and the (a, b) endpoint arrays of a WindowGraph CSV."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError("missing header line")
        fields = dict(tok.split("=", 1) for tok in header[1:].split())
        a, b = [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            sa, sb = line.split(";")
            a.append([int(v) for v in sa.split(",")])
            b.append([int(v) for v in sb.split(",")])
    info = {"seed": int(fields["seed"]), "rmax": int(fields["rmax"]),
            "window": parse_window_spec(fields["window"])}
    d = info["window"].shape[1]
    return info, np.array(a, dtype=np.int64).reshape(-1, d), np.array(b, dtype=np.int64).reshape(-1, d)


def sample_window(seed: int, m: PercolationModel, Q, R_max: int) -> WindowGraph:
    """All open edges with an endpoint in Q and length <= R_max for configuration ``seed``."""
    Q = as_vertex_set(Q, m.group.dimension)
    eps = epsilon_tail(m, R_max)
    if eps > m.tail_tol:
        raise TruncationError(
            f"truncation too coarse: epsilon({R_max}) = {eps:.3g} > tail_tol = {m.tail_tol:.3g}"
        )
    a, b, lens, probs = candidate_pairs(m, Q, R_max)
    u = kernels.mix_uniform(seed, kernels.fnv_fold(a, b))
    open_ = u < probs
    return WindowGraph(m, Q, R_max, seed, a[open_], b[open_], lens[open_], len(Q) * eps)


def truncation_radius(m: PercolationModel, start: int = 1) -> int:
    """Smallest R_max >= start with epsilon(R_max) <= tail_tol."""
    R = max(start, 1)
    while epsilon_tail(m, R) > m.tail_tol:
        R += 1
    return R


@dataclass
class LongEdgeCensus:
    order: np.ndarray
    counts: np.ndarray
    R: int
    epsilon: float
    delta: float

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def omega1(self) -> bool:
        """Too many long edges: sum Y_i >= |Q| (epsilon + delta)."""
        return self.total >= len(self.order) * (self.epsilon + self.delta)


def long_edge_census(w: WindowGraph, Q, R: int, delta: float | None = None) -> LongEdgeCensus:
    """Y_i: long edges at x_i not already counted at an earlier x_j (lexicographic order)."""
    if R >= w.rmax:
        raise ValueError("R must be smaller than the truncation radius")
    Q = as_vertex_set(Q, w.window.shape[1])
    if delta is None:
        delta = 1.0 / moment_constants(w.model)[1]
    qk = w.keys(Q)  # increasing: Q sorted lexicographically
    long_ = w.lengths > R
    ka, kb = w.ka[long_], w.kb[long_]
    ia = np.searchsorted(qk, ka)
    ib = np.searchsorted(qk, kb)
    in_a = (ia < len(qk)) & (qk[np.minimum(ia, len(qk) - 1)] == ka)
    in_b = (ib < len(qk)) & (qk[np.minimum(ib, len(qk) - 1)] == kb)
    big = len(qk) + 1
    owner = np.minimum(np.where(in_a, ia, big), np.where(in_b, ib, big))
    owner = owner[owner < big]
    counts = np.bincount(owner, minlength=len(qk)).astype(np.int64)
    return LongEdgeCensus(Q, counts, R, epsilon_tail(w.model, R), float(delta))


class LongEdgeSampler:
    """Fast repeated census of long edges at Q over many independent seeds.

    Precomputes the candidate long pairs once; each seed then costs one hash
    pass.  Y_1 is the count at the lexicographically first point of Q.
    """

    def __init__(self, m: PercolationModel, Q, R: int, R_max: int):
        Q = as_vertex_set(Q, m.group.dimension)
        if epsilon_tail(m, R_max) > m.tail_tol:
            raise TruncationError("truncation too coarse")
        self.model, self.Q, self.R, self.R_max = m, Q, R, R_max
        a, b, lens, probs = candidate_pairs(m, Q, R_max, min_length=R + 1)
        self.h = kernels.fnv_fold(a, b)
        self.p = probs
        first = Q[0]
        self.at_first = np.all(a == first, axis=1) | np.all(b == first, axis=1)

    def sample(self, seed: int) -> tuple[int, int]:
        open_ = kernels.mix_uniform(seed, self.h) < self.p
        return int(open_[self.at_first].sum()), int(open_.sum())

    def run(self, base_seed: int, trials: int) -> tuple[np.ndarray, np.ndarray]:
        y1 = np.empty(trials, dtype=np.int64)
        tot = np.empty(trials, dtype=np.int64)
        for i in range(trials):
            y1[i], tot[i] = self.sample(kernels.derive_seed(base_seed, i))
        return y1, tot
