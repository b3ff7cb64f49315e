from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from idslab.geometry import boundary, box, core
from idslab.percolation import epsilon_tail, long_edge_census, moment_constants, r_zero, sample_window, truncation_radius
from idslab.spectral import (
    FiniteGraph,
    F_R,
    F_tilde_R,
    InertiaCounter,
    StepFunction,
    SymMatrix,
    boundary_defect,
    count_function,
    graph_laplacian,
    induced_graph,
    inertia_count,
    long_edge_part,
    rank,
    restricted_laplacian,
    scale,
    sup_distance,
)


def path(n):
    return FiniteGraph.from_coords(np.arange(n).reshape(-1, 1), [((i,), (i + 1,)) for i in range(n - 1)])


def rand_sym(rng, n, density=None):
    if density is None:
        M = rng.normal(size=(n, n))
    else:
        M = sp.random(n, n, density=density, random_state=rng, data_rvs=rng.standard_normal).toarray()
    return (M + M.T) / 2


# -- matrices ---------------------------------------------------------------

def test_laplacian_small_graphs():
    K2 = FiniteGraph.from_coords([(0,), (1,)], [((0,), (1,))])
    assert np.array_equal(graph_laplacian(K2).toarray(), [[1, -1], [-1, 1]])
    empty = FiniteGraph.from_coords([(0,), (3,), (7,)])
    assert not graph_laplacian(empty).toarray().any()
    K3 = FiniteGraph.from_coords([(0,), (1,), (2,)], [((0,), (1,)), ((1,), (2,)), ((0,), (2,))])
    A = graph_laplacian(K3).toarray()
    assert np.array_equal(np.diag(A), [2, 2, 2])
    assert np.allclose(np.linalg.eigvalsh(A), [0, 3, 3])


def test_laplacian_psd(geo, rng):
    for seed in range(5):
        w = sample_window(seed, geo, box(80, 1), truncation_radius(geo))
        A = graph_laplacian(induced_graph(w, box(80, 1))).toarray()
        assert np.allclose(A.sum(axis=1), 0)
        assert np.linalg.eigvalsh(A).min() >= -10 * np.finfo(float).eps * max(1, np.abs(A).sum(axis=1).max())


def test_restricted_laplacian_examples(z1, empty, sure_nn):
    from idslab.percolation import PercolationModel
    from idslab.profiles import Table
    w = sample_window(0, sure_nn, box(5, 1), 1)
    A = restricted_laplacian(w, box(5, 1)).toarray()
    assert np.array_equal(np.diag(A), [2] * 5)
    assert np.array_equal(np.diag(A, 1), [-1] * 4)
    # no edges leave Q: defect vanishes
    w0 = sample_window(0, empty, box(5, 1), 1)
    assert np.array_equal(restricted_laplacian(w0, box(5, 1)).toarray(),
                          graph_laplacian(induced_graph(w0, box(5, 1))).toarray())
    # lone boundary edge
    w = sample_window(0, sure_nn, box(3, 1, origin=(-1,)), 1)
    assert restricted_laplacian(w, [(0,)]).toarray().tolist() == [[2.0]]
    half = PercolationModel(z1, Table((1.0,)))
    w = sample_window(0, half, box(2, 1), 1)
    with pytest.raises(ValueError):
        restricted_laplacian(w, box(10, 1))


def test_boundary_defect_sign_convention(geo):
    """Delta_{Gamma[Q]}[Q_R] = Delta_omega[Q_R] + D, with D <= 0."""
    Q = box(60, 1)
    for seed in range(10):
        w = sample_window(seed, geo, Q, truncation_radius(geo))
        for R in (0, 1, 3):
            D = boundary_defect(w, Q, R)
            QR = core(geo.group, Q, R)
            lhs = graph_laplacian(induced_graph(w, Q))
            keep = np.searchsorted(w.keys(Q), w.keys(QR))
            lhs = lhs.toarray()[np.ix_(keep, keep)]
            rhs = restricted_laplacian(w, QR).toarray() + D.toarray()
            assert np.array_equal(lhs, rhs)
            assert np.all(D.diagonal() <= 0)
            leaving = np.sum(D.diagonal() != 0)
            assert rank(D) == leaving


def test_boundary_defect_trace_vs_census(geo):
    Q = box(100, 1)
    R = r_zero(geo)
    for seed in range(10):
        w = sample_window(seed, geo, Q, truncation_radius(geo))
        D = boundary_defect(w, Q, R)
        cen = long_edge_census(w, Q, R)
        assert abs(D.diagonal().sum()) <= cen.total


def test_long_edge_part(geo):
    Q = box(120, 1)
    rmax = truncation_radius(geo)
    w = sample_window(3, geo, Q, rmax)
    assert not long_edge_part(w, Q, rmax).toarray().any()
    for R in (1, 2, 4):
        L, rest = long_edge_part(w, Q, R, with_remainder=True)
        n_long = int(np.sum((w.lengths > R) & np.isin(w.a.ravel(), Q.ravel()) & np.isin(w.b.ravel(), Q.ravel())))
        assert rank(L) <= 2 * n_long
        assert np.all(np.diag(L.toarray()) == 0)
        assert np.array_equal((L + rest).toarray(), restricted_laplacian(w, Q).toarray())


# -- counting functions -----------------------------------------------------

def test_count_function_examples():
    K2 = FiniteGraph.from_coords([(0,), (1,)], [((0,), (1,))])
    f = count_function(graph_laplacian(K2))
    assert [f(-1), f(0), f(1), f(2)] == [0, 1, 1, 2]
    f = count_function(graph_laplacian(path(3)))
    assert np.allclose(f.breakpoints, [0, 1, 3])
    assert f.final == 3


def test_sparse_counts_match_dense(rng):
    A = rand_sym(rng, 50, density=0.1)
    ev = np.linalg.eigvalsh(A)
    counter = InertiaCounter(sp.csr_matrix(A))
    for E in rng.uniform(ev.min() - 1, ev.max() + 1, size=20):
        assert counter.count_below(E) == int(np.sum(ev < E))


def test_bisection_path_matches_dense(rng):
    A = rand_sym(rng, 120, density=0.05)
    dense = count_function(sp.csr_matrix(A))
    bis = count_function(sp.csr_matrix(A), dense_cutoff=0)
    assert np.allclose(dense.breakpoints, bis.breakpoints, atol=1e-8)
    assert np.array_equal(dense.values, bis.values)


def test_exact_shift_at_eigenvalue():
    A = graph_laplacian(path(3))
    # shifts landing on an eigenvalue are nudged upward, so the hit is counted
    assert inertia_count(A, 1.0) == 2
    assert inertia_count(A, 3.0) == 3
    assert inertia_count(A, 0.5) == 1


def test_multiplicity_grouping():
    f = count_function(sp.identity(4, format="csr") * 2.0)
    assert list(f.breakpoints) == [2.0] and list(f.values) == [4]


# -- step functions ---------------------------------------------------------

def test_sup_distance_examples():
    f = StepFunction.from_jumps([0.0], [1.0])
    g = StepFunction.from_jumps([1.0], [1.0])
    assert sup_distance(f, f) == 0
    assert sup_distance(f, g) == 1
    h = StepFunction.from_jumps([0.0, 2.0], [0.5, 0.5])
    assert sup_distance(h, g) == 0.5


def test_scale_round_trip():
    K2 = FiniteGraph.from_coords([(0,), (1,)], [((0,), (1,))])
    f = count_function(graph_laplacian(K2))
    assert np.array_equal(scale(f, 1.0).values, f.values)
    assert scale(f, 0.5).final == 1
    g = scale(scale(f, 3.7), 1 / 3.7)
    assert np.array_equal(g.breakpoints, f.breakpoints)
    assert np.allclose(g.values, f.values, rtol=4 * np.finfo(float).eps)


def test_step_csv_round_trip(tmp_path, rng):
    f = count_function(sp.csr_matrix(rand_sym(rng, 30)))
    f = scale(f, 1 / 30)
    f.to_csv(tmp_path / "f.csv")
    g = StepFunction.read_csv(tmp_path / "f.csv")
    assert np.array_equal(f.breakpoints, g.breakpoints)
    assert np.array_equal(f.values, g.values)
    assert f.final == g.final


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=12),
       st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=12))
def test_sup_distance_is_a_metric(xs, ys):
    f = StepFunction.from_jumps(xs, [1.0] * len(xs))
    g = StepFunction.from_jumps(ys, [1.0] * len(ys))
    d = sup_distance(f, g)
    assert d == sup_distance(g, f) >= 0
    grid = np.concatenate([np.array(xs + ys), np.array(xs + ys) - 1e-9])
    assert d >= np.max(np.abs(f(grid) - g(grid))) - 1e-12
    assert f.is_monotone()


# -- structural invariants (randomised, reduced trial counts) -------------

def test_rank_perturbation(rng):
    for _ in range(100):
        n = int(rng.integers(5, 40))
        r = int(rng.integers(1, 4))
        A = rand_sym(rng, n)
        V = rng.normal(size=(n, r))
        C = V @ np.diag(rng.normal(size=r)) @ V.T
        d = sup_distance(count_function(sp.csr_matrix(A)), count_function(sp.csr_matrix(A + C)))
        assert d <= r


def test_compression(rng):
    for _ in range(100):
        n = int(rng.integers(5, 40))
        k = int(rng.integers(1, n))
        A = rand_sym(rng, n)
        keep = np.sort(rng.choice(n, size=k, replace=False))
        d = sup_distance(count_function(sp.csr_matrix(A)),
                         count_function(sp.csr_matrix(A[np.ix_(keep, keep)])))
        assert d <= 4 * (n - k)


def test_boundedness(geo, rng):
    Q = box(70, 1)
    for seed in range(5):
        w = sample_window(seed, geo, Q, truncation_radius(geo))
        for R in (0, 2, 5):
            assert F_R(w, Q, R).final <= len(Q)
        S = induced_graph(w, Q)
        assert count_function(graph_laplacian(S)).final <= S.num_vertices


def test_translation_invariance(geo, rng):
    w = sample_window(1, geo, box(40, 1), truncation_radius(geo))
    S = induced_graph(w, box(40, 1))
    f = F_tilde_R(geo.group, S, 2)
    for x in rng.integers(-1000, 1000, size=5):
        g = F_tilde_R(geo.group, S.translate((int(x),)), 2)
        assert np.array_equal(f.breakpoints, g.breakpoints)
        assert np.array_equal(f.values, g.values)


def _split(side, parts):
    step = side // parts
    return [box(step, 1, origin=(i * step,)) for i in range(parts)]


def test_weak_additivity(geo):
    g = geo.group
    R = r_zero(geo)
    delta = 1.0 / moment_constants(geo)[1]
    eps = epsilon_tail(geo, R)
    Q = box(240, 1)
    parts = _split(240, 4)
    checked = 0
    for seed in range(20):
        w = sample_window(seed, geo, Q, truncation_radius(geo))
        if long_edge_census(w, Q, R, delta).omega1:
            continue
        checked += 1
        total = F_R(w, Q, R)
        pieces = [F_R(w, P, R) for P in parts]
        from idslab.spectral import combine
        d = sup_distance(total, combine(pieces))
        bound = 4 * len(Q) * (eps + delta) + 4 * sum(len(boundary(g, P, R, "both")) for P in parts)
        assert d <= bound
    assert checked > 0


def test_window_counts_vs_induced_graph_counts(geo):
    g = geo.group
    R = r_zero(geo)
    delta = 1.0 / moment_constants(geo)[1]
    eps = epsilon_tail(geo, R)
    Q = box(240, 1)
    parts = _split(240, 4)
    checked = 0
    for seed in range(20):
        w = sample_window(seed, geo, Q, truncation_radius(geo))
        if long_edge_census(w, Q, R, delta).omega1:
            continue
        checked += 1
        s = sum(sup_distance(F_R(w, P, R), F_tilde_R(g, induced_graph(w, P), R)) for P in parts)
        assert s <= len(Q) * (eps + delta)
    assert checked > 0
