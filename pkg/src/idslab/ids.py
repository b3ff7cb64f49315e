"""IDS approximants along box sequences, periodic approximation, error budget, atoms."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from . import kernels
from ._workers import chunks, pmap
from .concentration import omega1_bound
from .frequencies import all_graphs, plain_frequency
from .geometry import FolnerBoxSequence, Indexer, _isin_sorted, as_vertex_set, boundary, core, diameter
from .percolation import (
    CapabilityError,
    PercolationModel,
    candidate_pairs,
    epsilon_tail,
    moment_constants,
    r_zero,
    sample_window,
    truncation_radius,
)
from .spectral import (
    MULTIPLICITY_TOL,
    F_tilde_R,
    FiniteGraph,
    StepFunction,
    _snap,
    count_function,
    restricted_laplacian,
    scale,
    stack_values,
    sup_distance,
)

MAX_WINDOW = 2_000_000
EXACT_TILE_MAX = 4


# --------------------------------------------------------------------------
# empirical IDS


@dataclass
class IdsRun:
    model: PercolationModel
    seed: int
    sides: list[int]
    R: int
    rmax: int
    functions: list[StepFunction]
    distances: list[float]
    bias_bounds: list[float]

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for side, f in zip(self.sides, self.functions):
            p = out / f"ids_L{side}.csv"
            f.to_csv(p)
            paths.append(p)
        manifest = {
            "seed": int(self.seed),
            "model": self.model.spec(),
            "box_sides": self.sides,
            "R": self.R,
            "truncation_radius": self.rmax,
            "tail_certificates": [float(b) for b in self.bias_bounds],
            "pairwise_distances": [float(d) for d in self.distances],
        }
        (out / "ids_run.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
        return paths


def empirical_ids(seed: int, m: PercolationModel, boxes: FolnerBoxSequence, count: int | None = None,
                  R: int = 0, R_max: int | None = None, **spectral_kw) -> IdsRun:
    """F_omega^R(Q_j)/|Q_j| for j = 1..count with one configuration omega.

    The largest window is sampled once and restricted to the smaller boxes,
    so every approximant sees the same omega.
    """
    count = len(boxes) if count is None else count
    if count < 1 or count > len(boxes):
        raise ValueError("count must lie in 1..len(boxes)")
    sizes = [len(boxes.box(j)) for j in range(1, count + 1)]
    if sizes[-1] > MAX_WINDOW:
        raise CapabilityError(
            f"window of {sizes[-1]} sites exceeds the spectral backend limit {MAX_WINDOW}; "
            "use fewer or smaller boxes"
        )
    R_max = truncation_radius(m) if R_max is None else R_max
    big = sample_window(seed, m, boxes.box(count), R_max)
    functions, biases = [], []
    for j in range(1, count + 1):
        Q = boxes.box(j)
        w = big.restrict(Q)
        QR = core(m.group, Q, R)
        if len(QR):
            f = count_function(restricted_laplacian(w, QR), **spectral_kw)
        else:
            f = StepFunction.zero()
        functions.append(scale(f, 1.0 / len(Q)))
        biases.append(w.bias_bound)
    dists = [sup_distance(a, b) for a, b in zip(functions, functions[1:])]
    return IdsRun(m, seed, list(boxes.side_lengths[:count]), R, R_max, functions, dists, biases)


# --------------------------------------------------------------------------
# periodic approximation


@dataclass
class PeriodicResult:
    """Weighted mixture of normalised counting functions.

    ``components`` are (function, weight) pairs whose weights sum to one; for
    Monte Carlo the weights are empirical frequencies of the sampled graphs.
    """

    function: StepFunction
    components: list[tuple[StepFunction, float]]
    samples: int | None = None

    def std_error(self, E) -> np.ndarray:
        if not self.samples:
            return np.zeros(np.shape(E))
        E = np.asarray(E, dtype=np.float64)
        mean = self.function(E)
        second = sum(w * f(E) ** 2 for f, w in self.components)
        var = np.maximum(second - mean ** 2, 0.0) * self.samples / max(self.samples - 1, 1)
        return np.sqrt(var / self.samples)

    def ci_halfwidth(self, E, z: float = 1.959963984540054) -> np.ndarray:
        return z * self.std_error(E)

    def to_csv(self, path) -> None:
        B = self.function.breakpoints
        half = self.ci_halfwidth(B)
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# final={format(self.function.final, '.17g')}\n")
            fh.write("breakpoint,value,ci_halfwidth\n")
            for b, v, h in zip(B, self.function.values, half):
                fh.write(f"{format(b, '.17g')},{format(v, '.17g')},{format(h, '.17g')}\n")


def _mixture(groups: dict, total: float) -> tuple[StepFunction, list]:
    comps = [(f, w / total) for f, w in groups.values()]
    B, vals = stack_values([f for f, _ in comps])
    weights = np.array([w for _, w in comps])
    return StepFunction(B, weights @ vals), comps


def periodic_approximation(m: PercolationModel, tile, mode="exact", R: int = 0,
                           samples: int = 10_000, seed: int = 0, **spectral_kw) -> PeriodicResult:
    """sum_S nu_S F~^R(S)/|tile| by exact enumeration, or its Monte Carlo mean.

    Monte Carlo draws the induced graph on the tile with independent trial
    seeds; F~^R(S) has expectation equal to the exact mixture.
    """
    tile = as_vertex_set(tile, m.group.dimension)
    n = len(tile)
    if mode == "exact":
        if n > EXACT_TILE_MAX:
            raise CapabilityError(f"exact mode supports tiles of at most {EXACT_TILE_MAX} sites, got {n}")
        groups = {}
        for i, S in enumerate(all_graphs(tile)):
            wgt = plain_frequency(m, S)
            if wgt > 0:
                groups[i] = (scale_or_zero(F_tilde_R(m.group, S, R, **spectral_kw), n), wgt)
        f, comps = _mixture(groups, 1.0)
        return PeriodicResult(f, comps, None)
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if samples < 100:
        raise ValueError("monte_carlo needs at least 100 samples")
    a, b, lens, probs = candidate_pairs(m, tile, max(diameter(m.group, tile), 1))
    idx = Indexer.covering(tile)
    tk = idx.encode(tile)
    inside = idx.inside(a) & idx.inside(b)
    inside[inside] &= _isin_sorted(idx.encode(a[inside]), tk) & _isin_sorted(idx.encode(b[inside]), tk)
    a, b, probs = a[inside], b[inside], probs[inside]
    ia = np.searchsorted(tk, idx.encode(a))
    ib = np.searchsorted(tk, idx.encode(b))
    h = kernels.fnv_fold(a, b)

    def run(rng_range):
        seen = {}
        for i in rng_range:
            open_ = kernels.mix_uniform(kernels.derive_seed(seed, i), h) < probs
            key = np.packbits(open_).tobytes()
            if key in seen:
                seen[key][1] += 1
            else:
                seen[key] = [open_, 1]
        return seen

    merged: dict = {}
    for part in pmap(run, chunks(samples, 8)):
        for key, (open_, cnt) in part.items():
            if key in merged:
                merged[key][1] += cnt
            else:
                merged[key] = [open_, cnt]
    groups = {}
    for key in sorted(merged):
        open_, cnt = merged[key]
        S = FiniteGraph(tile, np.stack([ia[open_], ib[open_]], axis=1))
        groups[key] = (scale_or_zero(F_tilde_R(m.group, S, R, **spectral_kw), n), cnt)
    f, comps = _mixture(groups, float(samples))
    return PeriodicResult(f, comps, samples)


def scale_or_zero(f: StepFunction, n: int) -> StepFunction:
    return scale(f, 1.0 / n) if len(f.breakpoints) else f


# --------------------------------------------------------------------------
# error budget


@dataclass
class Budget:
    value: float
    probability: float
    terms: dict
    flags: list[str] = field(default_factory=list)


def error_budget(m: PercolationModel, window, tile, R: int, delta: float, freq_gaps=None) -> Budget:
    """Upper bound on ||F^R(Q_j)/|Q_j| - sum_S nu_S F~^R(S)/|Q_n||| off Omega_1.

    ``freq_gaps`` are the deviations |#_S/|Q_j| - nu_S| over all graphs S on
    the tile; they are only used for tiles of at most 3 sites.
    """
    g = m.group
    Qj = as_vertex_set(window, g.dimension)
    Qn = as_vertex_set(tile, g.dimension)
    flags = []
    if R < r_zero(m):
        flags.append("R below r_zero: the probability certificate does not apply")
    tau = moment_constants(m)[1]
    if delta > 1.0 / tau:
        flags.append("delta > 1/tau: certificate uses the second Bernstein regime")
    bn = len(boundary(g, Qn, R, "both")) / len(Qn) if R > 0 else 0.0
    dn = diameter(g, Qn)
    bj = len(boundary(g, Qj, dn, "both")) / len(Qj) if dn > 0 else 0.0
    eps = epsilon_tail(m, R)
    terms = {
        "tile_boundary": 4 * bn,
        "window_boundary": (4 * bn + 1) * bj,
        "long_edges": 5 * (eps + delta),
    }
    if len(Qn) <= 3 and freq_gaps is not None:
        terms["frequencies"] = float(np.sum(np.abs(freq_gaps)))
    else:
        flags.append("frequency term omitted (tile larger than 3 sites or gaps not supplied)")
    prob = 1.0 - omega1_bound(m, len(Qj), delta, tau)
    return Budget(float(sum(terms.values())), prob, terms, flags)


def radius_schedule(boxes: FolnerBoxSequence, R0: int) -> list[int]:
    """R(n) for the stored prefix via n_k = least n with |d^k Q_m|/|Q_m| <= 1/k for all m >= n."""
    N = len(boxes)
    n_k = {}
    k = R0
    while True:
        ok = [boxes.boundary_ratio(n, k) <= 1.0 / k for n in range(1, N + 1)]
        first = None
        for n in range(N, 0, -1):
            if not ok[n - 1]:
                break
            first = n
        if first is None:
            break
        n_k[k] = first
        k += 1
    sched = []
    for n in range(1, N + 1):
        ks = [k for k, nk in n_k.items() if nk <= n]
        sched.append(max(ks) if ks else R0)
    return sched


def delta_schedule(j: int, tau: float) -> float:
    return 1.0 / (j ** 0.25 * tau)


# --------------------------------------------------------------------------
# W set and atoms


@dataclass
class WSet:
    values: np.ndarray
    witnesses: list[tuple[int, tuple]]

    def witness_label(self, i: int) -> str:
        n, edges = self.witnesses[i]
        return f"n={n}:" + " ".join(f"{a}-{b}" for a, b in edges)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("eigenvalue,witness\n")
            for i, v in enumerate(self.values):
                fh.write(f"{format(v, '.17g')},{self.witness_label(i)}\n")


def enumerate_W(max_vertices: int, tol: float = MULTIPLICITY_TOL) -> WSet:
    """Laplacian eigenvalues of all graphs on at most ``max_vertices`` vertices.

    Uses the graph atlas (all graphs up to isomorphism on <= 7 nodes), which is
    ordered by vertex count, so each value keeps a smallest witness.
    """
    if not 1 <= max_vertices <= 7:
        raise ValueError("max_vertices must lie in 1..7")
    vals, wits = [], []
    for G in nx.graph_atlas_g():
        n = G.number_of_nodes()
        if n == 0:
            continue
        if n > max_vertices:
            break
        L = nx.laplacian_matrix(G, nodelist=range(n)).toarray().astype(np.float64)
        ev = _snap(np.linalg.eigvalsh(L))
        edges = tuple(sorted(tuple(sorted(e)) for e in G.edges()))
        for v in ev:
            vals.append(v)
            wits.append((n, edges))
    order = np.argsort(vals, kind="stable")
    vals = np.asarray(vals)[order]
    wits = [wits[i] for i in order]
    out_v, out_w = [], []
    for v, wt in zip(vals, wits):
        if out_v and abs(v - out_v[-1]) <= tol * max(1.0, abs(v)):
            if (wt[0], len(wt[1])) < (out_w[-1][0], len(out_w[-1][1])):
                out_w[-1] = wt
            continue
        out_v.append(v)
        out_w.append(wt)
    return WSet(np.asarray(out_v), out_w)


@dataclass
class AtomReport:
    rows: list[tuple]  # (energy, jump, witness, status)
    atom_tol: float
    match_tol: float

    @property
    def detected(self) -> list[tuple]:
        return [r for r in self.rows if r[3] in ("matched", "unexplained", "ambiguous")]

    @property
    def unexplained(self) -> list[tuple]:
        return [r for r in self.rows if r[3] == "unexplained"]

    def jump_at(self, energy: float) -> float:
        for e, j, _, _ in self.rows:
            if abs(e - energy) <= self.match_tol * max(1.0, abs(energy)):
                return j
        return 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("energy,jump,witness,status\n")
            for e, j, wit, st in self.rows:
                fh.write(f"{format(e, '.17g')},{format(j, '.17g')},{wit},{st}\n")


def detect_atoms(run, candidates=None, atom_tol: float | None = None,
                 match_tol: float = MULTIPLICITY_TOL) -> AtomReport:
    """Jumps of the largest-window approximant, matched against candidate energies.

    ``candidates`` is a :class:`WSet` or a plain list of energies.  A jump above
    ``atom_tol`` away from every candidate is reported as ``unexplained``.
    """
    f = run.functions[-1] if isinstance(run, IdsRun) else run
    if atom_tol is None:
        size = (run.sides[-1] ** run.model.group.dimension) if isinstance(run, IdsRun) else None
        atom_tol = 10.0 / size if size else 1e-3
    if candidates is None:
        cand_v, labels = np.zeros(0), []
    elif isinstance(candidates, WSet):
        cand_v = candidates.values
        labels = [candidates.witness_label(i) for i in range(len(cand_v))]
    else:
        cand_v = np.asarray(candidates, dtype=np.float64)
        labels = [""] * len(cand_v)
    jumps = f.jumps
    rows = []
    used = set()
    for e, jmp in zip(f.breakpoints, jumps):
        tol = match_tol * max(1.0, abs(e))
        near = np.flatnonzero(np.abs(cand_v - e) <= tol)
        if jmp <= atom_tol:
            status = "below_tol"
        elif len(near) == 0:
            status = "unexplained"
        elif len(near) > 1:
            status = "ambiguous"
        else:
            status = "matched"
        wit = labels[near[0]] if len(near) else ""
        used.update(int(i) for i in near)
        if status != "below_tol" or len(near):
            rows.append((float(e), float(jmp), wit, status))
    for i, v in enumerate(cand_v):
        if i not in used:
            rows.append((float(v), 0.0, labels[i], "absent"))
    rows.sort(key=lambda r: r[0])
    return AtomReport(rows, float(atom_tol), match_tol)
