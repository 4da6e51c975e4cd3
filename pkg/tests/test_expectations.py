from fractions import Fraction

import numpy as np
import pytest

from cover_spectra.covers_models import ModelSpec, all_assignments, bgraph_from_fibres, count_embeddings_batch
from cover_spectra.expectations import (
    Factor,
    NotOccurring,
    cyclic_feasible,
    enumerate_etale,
    exhaustive_average,
    expansion_series,
    expected_count,
    monte_carlo_expected_count,
)
from cover_spectra.graph_core import bouquet, cycle_graph, figure_eight, is_pruned, stats

LOOP = bouquet(1)
HALF = bouquet(0, 1)


def two_cycle():
    return bgraph_from_fibres(LOOP, [2], {0: [(0, 1), (1, 0)]})


def lifted_edge():
    return bgraph_from_fibres(cycle_graph(2), [1, 1], {0: [(0, 0)]})


def test_single_edge_count_is_n():
    for n in (3, 7, 10):
        assert expected_count(lifted_edge(), n, ModelSpec("permutation")) == n


def test_two_cycle_n3_matches_brute_force():
    s = two_cycle()
    sig = all_assignments(LOOP, 3, ModelSpec("permutation"))
    assert len(sig) == 6
    brute = Fraction(int(count_embeddings_batch(s, sig).sum()), 6)
    assert brute == 1 == expected_count(s, 3, ModelSpec("permutation"))


def test_odd_involution_fixed_point_example():
    s = bgraph_from_fibres(HALF, [1], {0: [(0, 0)]})
    spec = ModelSpec("perm-involution-odd")
    sig = all_assignments(HALF, 5, spec)
    assert len(sig) == 15
    assert expected_count(s, 5, spec) == 1
    assert Fraction(int(count_embeddings_batch(s, sig).sum()), 15) == 1


def test_odd_involution_pair_brute_force_n5():
    # one matched pair over the half-loop, no fixed point specified
    s = bgraph_from_fibres(HALF, [2], {0: [(0, 1)]})
    spec = ModelSpec("perm-involution-odd")
    brute = exhaustive_average([s], 5, spec)[0]
    assert brute == expected_count(s, 5, spec) == Fraction(5 * 4, 5)
    assert brute != Fraction(5 * 4, 5 - 2)
    # two pairs plus the fixed point
    s = bgraph_from_fibres(HALF, [5], {0: [(0, 1), (2, 3), (4, 4)]})
    assert exhaustive_average([s], 5, spec)[0] == expected_count(s, 5, spec)


def test_even_involution_half_loop_not_occurring():
    s = bgraph_from_fibres(HALF, [1], {0: [(0, 0)]})
    spec = ModelSpec("perm-involution-even")
    assert expected_count(s, 4, spec) == 0
    with pytest.raises(NotOccurring):
        expansion_series(s, spec, 3)


def test_non_etale_is_zero():
    fork = bgraph_from_fibres(LOOP, [3], {0: [(0, 1), (0, 2)]})
    spec = ModelSpec("permutation", 3)
    assert expected_count(fork, 8, spec) == 0
    mean, err = monte_carlo_expected_count(fork, 8, spec, 2000)
    assert mean == 0 and err == 0


def test_size_precondition():
    with pytest.raises(ValueError):
        expected_count(two_cycle(), 1, ModelSpec("permutation"))


def test_cyclic_feasibility_examples():
    assert not cyclic_feasible(two_cycle(), 0)
    assert cyclic_feasible(bgraph_from_fibres(LOOP, [2], {0: [(0, 1)]}), 0)
    assert cyclic_feasible(bgraph_from_fibres(LOOP, [4], {0: [(0, 1), (1, 2), (2, 3)]}), 0)


def test_cyclic_infeasible_never_seen():
    s = two_cycle()
    spec = ModelSpec("cyclic", 5)
    assert expected_count(s, 8, spec) == 0
    mean, _ = monte_carlo_expected_count(s, 8, spec, 100000)
    assert mean == 0.0


def test_cyclic_full_cycle_counts():
    # S equal to a whole n-cycle over the loop occurs: n ordered copies of the unique cycle
    s = bgraph_from_fibres(LOOP, [3], {0: [(0, 1), (1, 2), (2, 0)]})
    spec = ModelSpec("cyclic")
    assert expected_count(s, 3, spec) == exhaustive_average([s], 3, spec)[0] == 3


def test_series_examples():
    spec = ModelSpec("permutation")
    ser = expansion_series(lifted_edge(), spec, 4)
    assert ser.leading_power == 1 and ser.coeffs == (1, 0, 0, 0)
    ser = expansion_series(two_cycle(), spec, 4)
    assert ser.leading_power == 0 and ser.coeffs[0] == 1
    assert ser.coeffs[1] == 0  # (n)_2 / (n)_2 == 1
    inv = Factor(0, 1, 2, -1)
    assert inv.value(5) == Fraction(1, 20)


def test_series_building_blocks():
    # 1/((n)(n-1)) = n^-2 (1 + x + x^2 + ...) and (n)(n-1) = n^2 (1 - x)
    s = bgraph_from_fibres(LOOP, [2], {0: [(0, 1), (1, 0)]})
    spec = ModelSpec("permutation")
    # two-cycle: vertex part n(n-1), edge part 1/(n(n-1)) -> leading 0
    assert expansion_series(s, spec, 3).coeffs == (1, 0, 0)
    one_vertex_two_edges = bgraph_from_fibres(figure_eight(), [2], {0: [(0, 1), (1, 0)], 2: [(0, 1)]})
    ser = expansion_series(one_vertex_two_edges, spec, 3)
    # (n)_2 / ((n)_2 * n) = 1/n exactly
    assert ser.leading_power == -1 and ser.coeffs == (1, 0, 0)
    path = bgraph_from_fibres(LOOP, [3], {0: [(0, 1), (1, 2)]})
    ser = expansion_series(path, spec, 3)
    # (n)_3 / (n)_2 = n - 2
    assert ser.leading_power == 1 and ser.coeffs == (1, -2, 0)


@pytest.mark.parametrize(
    "kind,base",
    [
        ("permutation", figure_eight()),
        ("cyclic", figure_eight()),
        ("perm-involution-even", bouquet(1, 1)),
        ("cyclic-involution-even", bouquet(1, 1)),
        ("perm-involution-odd", bouquet(0, 2)),
        ("cyclic-involution-odd", bouquet(1, 1)),
    ],
)
def test_leading_coefficient_is_one(kind, base):
    spec = ModelSpec(kind)
    for s in enumerate_etale(base, 3):
        try:
            ser = expansion_series(s, spec, 2)
        except NotOccurring:
            continue
        assert ser.coeffs[0] == 1
        assert ser.leading_power == -stats(s.total).order


@pytest.mark.parametrize("n", [2, 3, 4])
def test_exhaustive_small_figure_eight(n):
    spec = ModelSpec("permutation")
    shapes = [s for s in enumerate_etale(figure_eight(), 3) if s.total.num_vertices <= n and s.total.num_edges <= n]
    for s, avg in zip(shapes, exhaustive_average(shapes, n, spec)):
        assert avg == expected_count(s, n, spec)


def test_enumeration_counts_are_stable():
    assert len(enumerate_etale(figure_eight(), 5)) == 638
    assert len(enumerate_etale(cycle_graph(2), 5)) == 3
    assert len(enumerate_etale(bouquet(0, 2), 5)) == 15
    assert all(is_pruned(s.total) for s in enumerate_etale(bouquet(1), 4))


def test_monte_carlo_examples():
    spec = ModelSpec("permutation", 11)
    with pytest.raises(ValueError):
        monte_carlo_expected_count(lifted_edge(), 10, spec, 0)
    mean, err = monte_carlo_expected_count(lifted_edge(), 10, spec, 500)
    assert mean == 10 and err == 0
    mean, err = monte_carlo_expected_count(two_cycle(), 3, spec, 100000)
    assert abs(mean - 1) <= 3 * err
