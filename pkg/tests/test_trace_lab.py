import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cover_spectra.covers_models import ModelSpec, realize, sample_batch, CoordCover
from cover_spectra.graph_core import bouquet, cycle_graph, figure_eight, hashimoto_matrix, theta_graph
from cover_spectra.trace_lab import (
    TraceScanResult,
    ScanCell,
    c0_prediction,
    cover_traces,
    fit_coefficients,
    fit_series,
    hashimoto_bound,
    hashimoto_trace,
    loglog_slope,
    markov_bounds,
    nonalon_probability_scan,
    puder_comparison,
    r_default,
    trace_scan,
)

from conftest import graph_from_seed, seeds


def test_base_traces_figure_eight():
    # spectrum {3, 1, 1, -1}
    assert [hashimoto_trace(figure_eight(), k) for k in range(1, 6)] == [
        3**k + 2 + (-1) ** k for k in range(1, 6)
    ]


@given(seeds, st.integers(1, 9))
def test_trace_matches_dense_power(seed, k):
    g = graph_from_seed(seed, 8)
    h = hashimoto_matrix(g).astype(np.int64)
    assert hashimoto_trace(g, k) == int(np.trace(np.linalg.matrix_power(h, k)))


def test_trace_big_integer_fallback():
    g = bouquet(3)
    k = 30
    exact = 5**k + 3 * 1 + 2 * (-1) ** k  # spectrum of a 3-petal bouquet: 5, then 1 (x3), -1 (x2)
    assert hashimoto_trace(g, k) == exact
    assert hashimoto_trace(bouquet(6), 40) > 2**63


def test_trace_rejects_nonpositive_k():
    with pytest.raises(ValueError):
        hashimoto_trace(figure_eight(), 0)


@given(seeds, st.integers(1, 6))
def test_cover_traces_match_realized(seed, k):
    base = figure_eight()
    sig = sample_batch(base, 5, ModelSpec("permutation", seed), 4)
    fast = cover_traces(base, sig, k)
    for s, value in zip(sig, fast):
        assert value == hashimoto_trace(realize(CoordCover(base, 5, s)).total, k)


def test_scan_at_degree_one_is_zero():
    scan = trace_scan(theta_graph(), ModelSpec("permutation", 2), [1, 2, 3, 4, 5], [1], 50)
    assert all(c.mean == 0 and c.stderr == 0 for c in scan.cells.values())


def test_scan_values_are_integers():
    base = figure_eight()
    spec = ModelSpec("permutation", 6)
    sig = sample_batch(base, 12, spec, 200)
    diffs = cover_traces(base, sig, 4) - hashimoto_trace(base, 4)
    assert diffs.dtype.kind == "i"
    scan = trace_scan(base, spec, [4], [12], 200, chunk=200)
    assert scan.cells[(4, 12)].mean == pytest.approx(diffs.mean())
    assert scan.cells[(4, 12)].stderr == pytest.approx(diffs.std(ddof=1) / math.sqrt(200))


def test_scan_tangle_filter_zeroes_tangled_covers():
    base = figure_eight()
    spec = ModelSpec("permutation", 6)
    plain = trace_scan(base, spec, [3], [4], 60, chunk=60)
    filtered = trace_scan(base, spec, [3], [4], 60, tangle_filter=(2.0, 2, 6), chunk=60)
    assert filtered.cells[(3, 4)].mean <= plain.cells[(3, 4)].mean
    assert filtered.tangle_filter == (2.0, 2, 6)


def test_c0_prediction_examples():
    g = figure_eight()
    assert c0_prediction(g, 4) == 16
    for p in (2, 3, 5, 7):
        assert c0_prediction(g, p, lambda k: 2) == hashimoto_trace(g, 1) - 2
    assert c0_prediction(g, 1, lambda k: 5) == -5


def test_fit_exact_line():
    ns = np.array([10.0, 20, 40, 80])
    fit = fit_series(ns, 2 + 3 / ns, None, 2)
    assert fit.coeffs == pytest.approx((2, 3), abs=1e-10)
    assert fit.residual < 1e-10


def test_fit_quadratic_tail_within_ci():
    ns = np.array([32.0, 64, 128, 256, 512])
    fit = fit_series(ns, 1 / ns**2, None, 2)
    assert fit.ci_low[0] <= 0 <= fit.ci_high[0]
    assert abs(fit.coeffs[1]) < 0.05


@given(st.lists(st.integers(-50, 50), min_size=1, max_size=4))
def test_fit_recovers_polynomials(coeffs):
    r = len(coeffs)
    ns = np.array([8.0, 13, 21, 34, 55, 89])
    y = sum(c / ns**i for i, c in enumerate(coeffs))
    fit = fit_series(ns, y, np.full(len(ns), 0.1), r)
    assert fit.coeffs == pytest.approx(coeffs, abs=1e-9)


def test_fit_needs_enough_points():
    with pytest.raises(ValueError):
        fit_series([10, 20, 30], [1, 1, 1], None, 2)
    with pytest.raises(ValueError):
        fit_series([100, 100.0000001, 100.0000002, 100.0000003, 100.0000004], [1] * 5, None, 3)


def test_fit_coefficients_from_scan():
    cells = {(4, n): ScanCell(16 + 5 / n, 0.01, 100) for n in (32, 64, 128, 256)}
    fit = fit_coefficients(TraceScanResult(cells, 100, 0, "permutation"), 4, 2)
    assert fit.coeffs == pytest.approx((16, 5), abs=1e-9)
    assert fit.level == 0.99


def test_nonalon_huge_epsilon_is_zero():
    scan = nonalon_probability_scan(figure_eight(), ModelSpec("permutation", 1), 4 - 2 * math.sqrt(3) + 0.01, [8, 16], 300)
    assert [p for _, p, _ in scan.rows] == [0.0, 0.0]
    assert math.isnan(scan.slope)


def test_loglog_slope_exact_power_law():
    rows = [(n, 3.0 / n, 1e-3 / n) for n in (16, 32, 64, 128)]
    slope, _ = loglog_slope(rows)
    assert slope == pytest.approx(-1.0)


def test_markov_bounds_examples():
    b = markov_bounds(101, 20)
    assert b["hashimoto_bound"] == pytest.approx(10 * (100 ** (1 / 40) + 100 ** (-1 / 40)))
    assert abs(b["hashimoto_bound"] - 20.13) < 0.01
    assert b["adjacency_bound_balanced"] == pytest.approx(101 ** (1 / 21) * 20 ** (20 / 21))
    assert b["adjacency_bound_as_written"] == pytest.approx(101 ** (1 / 20) * 20 ** (20 / 21))
    assert b["hashimoto_bound"] < b["adjacency_bound_balanced"]
    assert hashimoto_bound(10, 1) == pytest.approx(10.0)
    far = markov_bounds(50, 10**6)
    assert far["hashimoto_bound"] == pytest.approx(2 * 7, rel=1e-5)
    assert far["adjacency_bound_balanced"] == pytest.approx(2 * 7, rel=1e-4)


def test_markov_sweep():
    for d in range(5, 201):
        b = markov_bounds(d, r_default(d))
        assert b["hashimoto_bound"] < b["adjacency_bound_balanced"]


def test_r_default():
    assert r_default(101) == 22
    assert r_default(5) == 6


def test_puder_comparison():
    row = puder_comparison(4)
    assert row["constant_offset_row"] == pytest.approx(2 * math.sqrt(3) + 0.86)
    assert round(row["constant_offset_row"], 3) == 4.324
    assert puder_comparison(10**6)["hashimoto_gap"] < 1e-3
    gaps = {d: puder_comparison(d)["hashimoto_gap"] for d in range(3, 201)}
    peak = max(gaps, key=gaps.get)
    assert peak == 6
    assert all(gaps[d] <= gaps[d + 1] for d in range(3, peak))
    assert all(gaps[d] >= gaps[d + 1] for d in range(peak, 200))


def test_bounds_reject_small_d():
    with pytest.raises(ValueError):
        markov_bounds(2, 3)
    with pytest.raises(ValueError):
        puder_comparison(2)
