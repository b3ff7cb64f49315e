"""Acceptance criteria, one test each, with the stated tolerances and time limits.

Every test reports a single PASS/FAIL line through the ``acceptance`` fixture
(collected into the pytest summary) and then asserts the same verdict.
"""
from __future__ import annotations

import hashlib
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from idslab.concentration import validate_tails
from idslab.frequencies import all_graphs, analytic_frequency, empirical_frequency
from idslab.geometry import FolnerBoxSequence, LatticeGroup, box
from idslab.ids import detect_atoms, empirical_ids, enumerate_W, error_budget, periodic_approximation
from idslab.percolation import (
    PercolationModel,
    long_edge_census,
    moment_constants,
    r_zero,
    sample_window,
    truncation_radius,
)
from idslab.profiles import Geometric, Table
from idslab.spectral import F_R, FiniteGraph, InertiaCounter, count_function, scale, sup_distance

SEED = 2026
ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def z1():
    return LatticeGroup(1)


@pytest.fixture(scope="module")
def geo(z1):
    return PercolationModel(z1, Geometric(0.25, 0.5))


def _random_symmetric(rng, n, kind):
    if kind == 0:
        A = rng.standard_normal((n, n))
        return (A + A.T) / 2
    if kind == 1:
        A = sp.random(n, n, density=min(1.0, 3.0 / n), random_state=int(rng.integers(1 << 31))).toarray()
        return A + A.T + np.diag(rng.standard_normal(n))
    # sparse integer entries: exact ties and repeated eigenvalues are common
    A = rng.integers(-2, 3, (n, n)).astype(float)
    A = np.triu(A) * (rng.random((n, n)) < 0.05)
    return A + A.T


def test_1_inertia_matches_dense(acceptance):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    bad = total = 0
    for trial in range(1000):
        n = int(rng.integers(5, 201))
        A = _random_symmetric(rng, n, trial % 3)
        ev = np.linalg.eigvalsh(A)
        counter = InertiaCounter(sp.csr_matrix(A) if trial % 3 else A)
        for E in rng.uniform(ev[0] - 1, ev[-1] + 1, 20):
            total += 1
            bad += counter.count_below(float(E)) != int(np.sum(ev < E))
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt <= 120
    acceptance(1, ok, f"{bad} mismatches in {total} shift counts over 1000 matrices, {dt:.1f}s (limit 120s)")
    assert ok


def test_2_rank_inequalities(acceptance):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    v_rank = v_comp = 0
    worst_rank = worst_comp = 0.0
    for _ in range(1000):
        n = int(rng.integers(5, 60))
        A = rng.standard_normal((n, n))
        A = (A + A.T) / 2
        r = int(rng.integers(1, 6))
        V = rng.standard_normal((n, r))
        C = V @ np.diag(rng.standard_normal(r)) @ V.T
        d = sup_distance(count_function(sp.csr_matrix(A)), count_function(sp.csr_matrix(A + C)))
        worst_rank = max(worst_rank, d / r)
        v_rank += d > r
        k = int(rng.integers(1, n))
        keep = np.sort(rng.choice(n, size=k, replace=False))
        d = sup_distance(count_function(sp.csr_matrix(A)), count_function(sp.csr_matrix(A[np.ix_(keep, keep)])))
        worst_comp = max(worst_comp, d / (n - k))
        v_comp += d > 4 * (n - k)
    dt = time.perf_counter() - t0
    ok = v_rank == 0 and v_comp == 0 and dt <= 60
    acceptance(2, ok, f"rank-perturbation violations {v_rank}/1000 (max d/r {worst_rank:.2f}), "
                      f"compression violations {v_comp}/1000 (max d/(dimV-dimU) {worst_comp:.2f}), {dt:.1f}s (limit 60s)")
    assert ok


def _sup_to_continuous(f, N, lo, hi):
    """sup over [lo, hi] of |f - N| for a step f and continuous nondecreasing N."""
    B = f.breakpoints[(f.breakpoints >= lo) & (f.breakpoints <= hi)]
    pts = np.concatenate([[lo, hi], B])
    right = np.abs(f(pts) - N(pts))
    left = np.abs(f.left_limit(pts) - N(pts))
    return float(max(right.max(), left.max()))


def test_3_sure_edge_closed_form(acceptance, z1):
    t0 = time.perf_counter()
    m = PercolationModel(z1, Table((1.0,)))
    run = empirical_ids(SEED, m, FolnerBoxSequence(z1, [2000]))
    N = lambda E: np.arccos(np.clip(1 - np.asarray(E) / 2, -1, 1)) / math.pi
    d = _sup_to_continuous(run.functions[0], N, 0.0, 4.0)
    dt = time.perf_counter() - t0
    ok = d <= 5e-3 and dt <= 60
    acceptance(3, ok, f"sup distance to arccos closed form {d:.3e} (tol 5e-3) at L=2000, {dt:.1f}s (limit 60s)")
    assert ok


def test_4_periodic_mc_vs_exact(acceptance, geo):
    t0 = time.perf_counter()
    tile = box(3, 1)
    n_graphs = len(list(all_graphs(tile)))
    exact = periodic_approximation(geo, tile, "exact").function
    mc = periodic_approximation(geo, tile, "monte_carlo", samples=10_000, seed=SEED)
    B = exact.breakpoints
    half = mc.ci_halfwidth(B)
    gap = np.abs(mc.function(B) - exact(B))
    outside = int(np.sum(gap > half))
    dt = time.perf_counter() - t0
    ok = outside == 0 and half.max() <= 1e-2 and dt <= 60
    acceptance(4, ok, f"{outside}/{len(B)} breakpoints outside the 95% CI, max half-width {half.max():.2e} "
                      f"(tol 1e-2), exact mixture over {n_graphs} graphs, {dt:.1f}s (limit 60s)")
    assert ok


def test_5_frequency_formulas(acceptance, geo, z1):
    t0 = time.perf_counter()
    boxes = FolnerBoxSequence(z1, [10_000])
    patterns = {
        "single edge": (FiniteGraph.from_coords([(0,), (1,)], [((0,), (1,))]), "plain"),
        "isolated vertex": (FiniteGraph.from_coords([(0,)]), ("isolated", 1)),
        "isolated dimer": (FiniteGraph.from_coords([(0,), (1,)], [((0,), (1,))]), ("isolated", 1)),
    }
    parts, ok = [], True
    for name, (S, mode) in patterns.items():
        rep = empirical_frequency(SEED, geo, S, mode, boxes)
        ok &= rep.passed
        z = abs(rep.ratios[-1] - rep.analytic) / rep.sigma
        parts.append(f"{name} {rep.ratios[-1]:.4f} vs {rep.analytic:.4f} ({z:.2f} sigma)")
    worst = 0.0
    for n in range(1, 5):
        total = math.fsum(analytic_frequency(geo, S)[0] for S in all_graphs(box(n, 1)))
        worst = max(worst, abs(total - 1.0))
    ok &= worst <= 1e-12
    dt = time.perf_counter() - t0
    ok &= dt <= 120
    acceptance(5, ok, "; ".join(parts) + f"; max |sum of pattern frequencies - 1| = {worst:.1e} over <= 4 sites, {dt:.1f}s (limit 120s)")
    assert ok


def test_6_tail_bounds(acceptance, geo):
    t0 = time.perf_counter()
    R = r_zero(geo)
    rep = validate_tails(SEED, geo, box(100, 1), R, trials=10_000)
    dt = time.perf_counter() - t0
    ok = rep.violations == 0 and len(rep.delta_rows) == 5 and len(rep.t_rows) == 8 and dt <= 120
    acceptance(6, ok, f"{rep.violations} violations over 8 t-values and 5 deltas, |Q|=100, R=r_zero={R}, "
                      f"10^4 trials, {dt:.1f}s (limit 120s)")
    assert ok


def test_7_uniform_convergence(acceptance, geo, z1):
    t0 = time.perf_counter()
    boxes = FolnerBoxSequence(z1, [100, 200, 400, 800])
    run = empirical_ids(SEED, geo, boxes)
    d = run.distances
    decreasing = all(a > b for a, b in zip(d, d[1:]))
    final_ok = d[-1] <= 0.05
    # estimator agreement against the mid-size (L=200) periodic approximation
    R = r_zero(geo)
    delta = 1.0 / moment_constants(geo)[1]
    tile = boxes.box(2)
    Qj = boxes.box(4)
    per = periodic_approximation(geo, tile, "monte_carlo", R=R, samples=2000, seed=SEED).function
    bud = error_budget(geo, Qj, tile, R, delta)
    checked = violations = 0
    worst = 0.0
    for i in range(10):
        w = sample_window(SEED + i, geo, Qj, truncation_radius(geo))
        if long_edge_census(w, Qj, R, delta).omega1:
            continue
        checked += 1
        D = sup_distance(scale(F_R(w, Qj, R), 1.0 / len(Qj)), per)
        worst = max(worst, D)
        violations += D > bud.value
    dt = time.perf_counter() - t0
    ok = decreasing and final_ok and violations == 0 and checked > 0 and dt <= 300
    acceptance(7, ok, f"consecutive distances {[round(x, 5) for x in d]} strictly decreasing={decreasing}, "
                      f"final {d[-1]:.4f} (tol 0.05); budget check {violations} violations on {checked}/10 "
                      f"census-passing runs (max D {worst:.3f}, budget {bud.value:.3f}), {dt:.1f}s (limit 300s)")
    assert ok


def test_8_atoms(acceptance, geo, z1):
    t0 = time.perf_counter()
    assert geo.strictly_mixed(truncation_radius(geo))
    boxes = FolnerBoxSequence(z1, [10_000])
    run = empirical_ids(SEED, geo, boxes)
    W = enumerate_W(5)
    rep = detect_atoms(run, W)
    vertex = FiniteGraph.from_coords([(0,)])
    dimer = FiniteGraph.from_coords([(0,), (1,)], [((0,), (1,))])
    fv = empirical_frequency(SEED, geo, vertex, ("isolated", 1), boxes)
    fd = empirical_frequency(SEED, geo, dimer, ("isolated", 1), boxes)
    j0, j2 = rep.jump_at(0.0), rep.jump_at(2.0)
    lb0 = fv.analytic - 3 * fv.sigma
    lb2 = fd.analytic - 3 * fd.sigma
    unexplained = rep.unexplained
    dt = time.perf_counter() - t0
    ok = j0 >= lb0 and j2 >= lb2 and not unexplained and dt <= 180
    acceptance(8, ok, f"jump at 0 {j0:.4f} >= {lb0:.4f}, jump at 2 {j2:.4f} >= {lb2:.4f}, "
                      f"{len(rep.detected)} atoms detected, {len(unexplained)} outside W(5), {dt:.1f}s (limit 180s)")
    assert ok


def test_9_determinism(acceptance, tmp_path):
    cfg = ROOT / "configs" / "geometric_z1.ini"
    commands = ("sample", "ids", "periodic", "freq", "bernstein", "atoms", "budget", "wset")
    digests = {}
    for threads in ("1", "4"):
        env = dict(os.environ, IDSLAB_THREADS=threads)
        for cmd in commands:
            out = tmp_path / f"t{threads}" / cmd
            r = subprocess.run([sys.executable, "-m", "idslab.cli", cmd, "--config", str(cfg), "--out", str(out)],
                               env=env, capture_output=True, text=True)
            assert r.returncode == 0, r.stderr
            for p in sorted(out.glob("*.csv")):
                digests.setdefault(f"{cmd}/{p.name}", []).append(hashlib.sha256(p.read_bytes()).hexdigest())
    differ = [k for k, v in digests.items() if len(v) != 2 or v[0] != v[1]]
    ok = not differ and len(digests) > 0
    acceptance(9, ok, f"{len(digests)} CSV files byte-identical across IDSLAB_THREADS=1 and 4"
               + (f"; differing: {differ}" if differ else ""))
    assert ok
