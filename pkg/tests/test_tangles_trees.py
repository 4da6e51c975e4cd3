import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cover_spectra.covers_models import ModelSpec, bgraph_from_fibres, identity_cover, realize, sample
from cover_spectra.graph_core import (
    Graph,
    GraphError,
    adjacency_matrix,
    bouquet,
    cycle_graph,
    disjoint_union,
    figure_eight,
    is_pruned,
    path_graph,
    prune,
    stats,
    subdivide_edge,
    theta_graph,
)
from cover_spectra.spectra import eigenvalues
from cover_spectra.tangles_trees import (
    build_relative_tree,
    curious_identity_check,
    epsilon0,
    fundamental_subgraph_experiment,
    has_tangles,
    ihara_mu1,
    m_lower,
    mu1,
    push_forward,
    rayleigh,
    s_d_series,
    shannon_valence,
    tree_radius,
    truncated_tree_radius,
)
from cover_spectra.walks import vlg

from conftest import graph_from_seed, seeds


def test_mu1_examples():
    for k in (1, 3, 7):
        assert mu1(cycle_graph(k)) == pytest.approx(1.0, abs=1e-10)
    assert mu1(figure_eight()) == pytest.approx(3.0, abs=1e-10)
    m = mu1(subdivide_edge(figure_eight(), 0, 10))
    assert 1.0 < m < 3.0


def test_m_lower_examples():
    assert [m_lower(d) for d in (4, 10, 26)] == [1, 2, 3]
    for d in range(3, 400):
        assert m_lower(d) == math.floor((math.sqrt(d - 1) - 1) / 2) + 1


def test_epsilon0_examples():
    assert epsilon0(figure_eight(), 5) == pytest.approx(1 / 3, abs=1e-12)
    assert epsilon0(figure_eight(), 4) == pytest.approx(4 - 2 * math.sqrt(3), abs=1e-12)
    with pytest.raises(ValueError):
        epsilon0(figure_eight(), 10)  # mu1 = 3 = sqrt(9)


def test_tree_radius_examples():
    assert tree_radius(figure_eight(), 4) == pytest.approx(4.0)
    assert tree_radius(figure_eight(), 5) == pytest.approx(13 / 3)
    # approaching sqrt(d-1) from above the radius tends to 2 sqrt(d-1)
    mu = 3.0 * (1 + 1e-6)
    assert mu + 9 / mu == pytest.approx(6.0, abs=1e-9)
    with pytest.raises(ValueError):
        tree_radius(bouquet(3), 4)


def test_build_relative_tree_examples():
    t = build_relative_tree(Graph.from_edges(1), 2, 3)
    assert t.num_vertices == 1 + 3 + 6
    assert sorted(t.degrees()) == [1] * 6 + [3] * 4
    assert build_relative_tree(figure_eight(), 0, 5) == figure_eight()
    t = build_relative_tree(figure_eight(), 1, 5)
    assert t.num_vertices == 2 and t.degrees() == (5, 1)
    with pytest.raises(GraphError):
        build_relative_tree(bouquet(3), 1, 5)


def test_relative_tree_over_base_completes_stars():
    base = bouquet(1, 1)
    psi = bgraph_from_fibres(base, [1], {0: [(0, 0)]})  # whole-loop lift without the half-loop
    t = build_relative_tree(psi, 2)
    assert t.total.degrees()[0] == 3
    assert t.total.is_connected()


def test_truncated_tree_radius():
    g = figure_eight()
    assert truncated_tree_radius(g, 5, 0) == pytest.approx(4.0)
    assert abs(truncated_tree_radius(g, 5, 12) - 13 / 3) < 0.05
    values = [truncated_tree_radius(g, 5, r) for r in range(13)]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))
    assert max(values) <= 13 / 3 + 1e-8
    for r in (0, 1, 3, 6):
        assert truncated_tree_radius(g, 5, r, "explicit") == pytest.approx(values[r], abs=1e-9)


@given(seeds, st.integers(0, 8))
def test_truncated_radius_bounded_by_tree_radius(seed, depth):
    psi = graph_from_seed(seed, 4, max_extra_edges=3, half_loop_prob=0.0)
    d = max(psi.degrees()) + 1
    if d < 3 or mu1(psi) <= math.sqrt(d - 1):
        return
    a = truncated_tree_radius(psi, d, depth)
    b = truncated_tree_radius(psi, d, depth + 1)
    assert b >= a - 1e-9
    assert b <= tree_radius(psi, d) + 1e-8


def test_shannon_examples():
    assert shannon_valence(bouquet(1)).valence == pytest.approx(2.0, abs=1e-8)
    assert shannon_valence(figure_eight()).valence == pytest.approx(4.0, abs=1e-8)
    g2, _ = vlg(figure_eight(), [2] * 4)
    lam = eigenvalues(adjacency_matrix(g2))[0]
    res = shannon_valence(figure_eight(), [2] * 4, walks="graph")
    assert res.valence == pytest.approx(lam, abs=1e-8)
    assert res.valence == pytest.approx(1 / res.z0)
    assert res.bisection_residual < 1e-10
    # directed excursions on the same lengths: z^2 per directed edge, four edges
    assert shannon_valence(figure_eight(), [2] * 4).valence == pytest.approx(2.0, abs=1e-8)


@given(seeds)
def test_shannon_graph_walks_match_vlg(seed):
    rng = np.random.default_rng(seed)
    t = graph_from_seed(seed, 4, max_extra_edges=3, half_loop_prob=0.0)
    if t.num_edges == 0 or not t.is_connected():
        return
    lengths = [0] * t.num_dir_edges
    for e in t.orbit_representatives():
        lengths[e] = lengths[t.iota[e]] = int(rng.integers(1, 4))
    big, _ = vlg(t, lengths)
    lam = eigenvalues(adjacency_matrix(big))[0]
    if lam <= 1.0 + 1e-9:
        return
    assert shannon_valence(t, lengths, walks="graph").valence == pytest.approx(lam, abs=1e-8)


def test_shannon_no_crossing():
    with pytest.raises(ValueError):
        shannon_valence(Graph.from_edges(2))
    assert shannon_valence(Graph.from_edges(2, [(0, 1)]), [3, 3]).valence == pytest.approx(1.0)


def test_ihara_mu1_cross_check():
    assert ihara_mu1(figure_eight()) == pytest.approx(3.0, abs=1e-8)
    for g in (theta_graph(), subdivide_edge(figure_eight(), 0, 3), bouquet(3)):
        assert ihara_mu1(g) == pytest.approx(mu1(g), abs=1e-8)


def first_return_walks(d: int, length: int) -> int:
    """Walks on the rooted tree (every vertex has d-1 children) that meet the root only at both ends."""
    if length == 0:
        return 0
    # counts[h] = number of walk prefixes currently at depth h >= 1
    counts = {1: d - 1}
    for _ in range(length - 2):
        nxt: dict[int, int] = {}
        for h, c in counts.items():
            nxt[h + 1] = nxt.get(h + 1, 0) + c * (d - 1)
            if h > 1:
                nxt[h - 1] = nxt.get(h - 1, 0) + c
        counts = nxt
    return counts.get(1, 0)


@pytest.mark.parametrize("d", [3, 4, 7])
def test_s_d_series_against_dp(d):
    coeffs = s_d_series(d, 20)
    assert coeffs[0] == d - 1
    assert all(c == 0 for c in coeffs[1::2])
    for k, c in enumerate(coeffs, start=2):
        assert c == first_return_walks(d, k)


def test_s_d_series_limits():
    with pytest.raises(ValueError):
        s_d_series(3, 41)
    assert all(isinstance(c, Fraction) for c in s_d_series(5, 10))


def test_curious_identity():
    zs = np.linspace(0.01, 0.24, 10)
    assert curious_identity_check(bouquet(2), 4, np.linspace(0.01, 0.28, 10)) < 1e-12
    assert curious_identity_check(figure_eight(), 5, [0.1]) < 1e-9
    assert curious_identity_check(theta_graph(), 5, zs) < 1e-9
    assert curious_identity_check(figure_eight(), 5, [1e-9]) < 1e-12
    with pytest.raises(ValueError):
        curious_identity_check(figure_eight(), 5, [0.3])


def test_has_tangles_examples():
    assert not has_tangles(path_graph(5), 1.5, 3).found
    assert not has_tangles(cycle_graph(6), 1.5, 3).found
    host = disjoint_union(cycle_graph(4), figure_eight())
    rep = has_tangles(host, 2.9, 2)
    assert rep.found and rep.witness_order == 1
    assert rep.witness_mu1 == pytest.approx(3.0)
    assert not has_tangles(figure_eight(), 3.5, 5).found
    with pytest.raises(ValueError):
        has_tangles(figure_eight(), 1.0, 2)


@given(seeds, st.floats(1.2, 2.5), st.integers(1, 4))
def test_tangle_witnesses_are_genuine(seed, nu, r):
    g = graph_from_seed(seed, 8, max_extra_edges=5, half_loop_prob=0.0)
    rep = has_tangles(g, nu, r, edge_budget=6)
    if rep.found:
        w = rep.witness
        assert w.is_connected() and is_pruned(w)
        assert stats(w).order < r
        assert mu1(w) >= nu


@given(seeds)
def test_subdivision_monotone(seed):
    psi = graph_from_seed(seed, 4, max_extra_edges=3, half_loop_prob=0.0)
    psi = prune(psi)
    if psi.num_vertices == 0 or max(psi.degrees()) < 3 or not psi.is_connected():
        return
    e = psi.orbit_representatives()[0]
    vals = [mu1(subdivide_edge(psi, e, s)) for s in range(1, 6)]
    assert all(a - b > 1e-10 for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 1.0


def test_rayleigh_examples():
    m = adjacency_matrix(cycle_graph(5))
    vals, vecs = np.linalg.eigh(m)
    assert rayleigh(m, vecs[:, 0]) == pytest.approx(vals[0])
    assert rayleigh(adjacency_matrix(figure_eight()), np.ones(1)) == 4.0
    assert rayleigh(m, np.ones(5)) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        rayleigh(m, np.zeros(5))


@given(seeds, st.floats(1e-6, 0.5))
def test_rayleigh_perturbation(seed, eps):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(1, 8))
    m = rng.normal(size=(size, size))
    m = m + m.T
    f1 = rng.normal(size=size)
    delta = rng.normal(size=size)
    f2 = f1 + delta * eps * np.linalg.norm(f1) / np.linalg.norm(delta) * rng.uniform()
    bound = 2 * np.linalg.norm(m, 2) * eps
    assert abs(rayleigh(m, f2) - rayleigh(m, f1)) <= bound + 1e-9


def test_push_forward_examples():
    base = cycle_graph(3)
    one = realize(identity_cover(base, 1))
    f = np.array([1.0, -2.0, 5.0])
    assert push_forward(one, f).tolist() == f.tolist()
    two = realize(sample(base, 2, ModelSpec("permutation", 4)))
    ind = np.zeros(6)
    ind[3] = 1
    assert push_forward(two, ind).tolist() == [0, 1, 0]


@given(seeds)
def test_push_forward_intertwines(seed):
    base = cycle_graph(3)
    cov = realize(sample(base, 3, ModelSpec("permutation", seed)))
    f = np.random.default_rng(seed).integers(-9, 10, size=9).astype(float)
    lhs = push_forward(cov, adjacency_matrix(cov.total) @ f)
    rhs = adjacency_matrix(base) @ push_forward(cov, f)
    assert np.array_equal(lhs, rhs)


def test_push_forward_rejects_non_covering():
    psi = bgraph_from_fibres(bouquet(2), [1], {0: [(0, 0)]})
    with pytest.raises(GraphError):
        push_forward(psi, np.ones(1))


def test_fundamental_experiment_smoke():
    base = figure_eight()
    both_loops = bgraph_from_fibres(base, [1], {0: [(0, 0)], 2: [(0, 0)]})
    rows = fundamental_subgraph_experiment(base, both_loops, [6], ModelSpec("permutation", 1), samples=50)
    cond, plain = rows
    assert cond.conditioned and not plain.conditioned
    assert cond.accepted == 50 and cond.target == pytest.approx(4.0)
    assert np.isfinite(cond.max_new).all()
    # a fibre point carrying both loops is a whole component, so 4 reappears as a new eigenvalue
    assert (cond.max_new > 4 - 1e-9).all()
