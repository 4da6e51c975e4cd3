"""Monte Carlo trace experiments, coefficient fits and the Markov bound table."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from .covers_models import CoordCover, ModelSpec, cover_adjacency_batch, realize, sample_batch
from .graph_core import Graph, adjacency_matrix, hashimoto_sparse
from .spectra import alon_bound, eigenvalues, new_spectrum_batch
from .tangles_trees import has_tangles
from .walks import iter_snbc


def hashimoto_trace(g: Graph, k: int) -> int:
    """``Trace(H^k)`` by exact integer matrix powers.

    Uses int64 sparse products while ``(dmax-1)**k`` cannot overflow, and
    Python integers otherwise.
    """
    if k < 1:
        raise ValueError("k must be positive")
    h = hashimoto_sparse(g)
    if g.num_dir_edges == 0:
        return 0
    dmax = max(g.degrees())
    bound = g.num_dir_edges * max(dmax - 1, 1) ** k
    if bound < 2**62:
        p = h.copy()
        for _ in range(k - 1):
            p = p @ h
        return int(p.diagonal().sum())
    dense = h.toarray().astype(object)
    p = dense.copy()
    for _ in range(k - 1):
        p = p.dot(dense)
    return int(sum(p[i, i] for i in range(p.shape[0])))


def base_snbc_array(base: Graph, k: int) -> np.ndarray:
    walks = list(iter_snbc(base, k))
    return np.array(walks, dtype=np.int64).reshape(len(walks), k)


def cover_traces(base: Graph, sigmas: np.ndarray, k: int) -> np.ndarray:
    """``Trace(H_G^k)`` for a batch of covers.

    A closed non-backtracking walk in the cover projects to one in the base,
    and a base SNBC walk lifts to a closed walk from fibre point ``i`` iff
    ``i`` is a fixed point of the composed permutations along it.
    """
    from ._kernels import walk_fixed_points

    walks = base_snbc_array(base, k)
    if len(walks) == 0:
        return np.zeros(len(sigmas), dtype=np.int64)
    return walk_fixed_points(np.ascontiguousarray(sigmas, dtype=np.int64), walks)


# trace scan


@dataclass(frozen=True)
class ScanCell:
    mean: float
    stderr: float
    trials: int
    flagged: bool = False


@dataclass
class TraceScanResult:
    cells: dict[tuple[int, int], ScanCell]
    trials: int
    seed: int
    model: str
    tangle_filter: tuple[float, int, int] | None = None

    def series(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        keys = sorted(n for kk, n in self.cells if kk == k)
        means = np.array([self.cells[(k, n)].mean for n in keys])
        errs = np.array([self.cells[(k, n)].stderr for n in keys])
        return np.array(keys, dtype=float), means, errs


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.int64)
    size = len(v)
    s1 = int(v.sum())
    s2 = int((v * v).sum())
    mean = Fraction(s1, size)
    if size < 2:
        return float(mean), 0.0
    var = (Fraction(s2, size) - mean * mean) * Fraction(size, size - 1)
    return float(mean), math.sqrt(float(var) / size)


def trace_scan(
    base: Graph,
    spec: ModelSpec,
    k_list: Sequence[int],
    n_list: Sequence[int],
    trials: int,
    tangle_filter: tuple[float, int, int] | None = None,
    chunk: int = 5000,
) -> TraceScanResult:
    """Mean of ``Trace(H_G^k) - Trace(H_B^k)`` over random covers.

    With ``tangle_filter = (nu, r, edge_budget)`` each value is multiplied
    by the indicator that the cover has no ``(>=nu, <r)``-tangle; cells where
    the tangle search hit its budget are flagged.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    base_traces = {k: hashimoto_trace(base, k) for k in k_list}
    values: dict[tuple[int, int], list[np.ndarray]] = {(k, n): [] for k in k_list for n in n_list}
    flagged: dict[int, bool] = {n: False for n in n_list}
    for n in n_list:
        done, stream = 0, 0
        while done < trials:
            size = min(chunk, trials - done)
            sig = sample_batch(base, n, spec, size, stream=stream)
            keep = np.ones(size, dtype=np.int64)
            if tangle_filter is not None:
                nu, r, budget = tangle_filter
                for t in range(size):
                    rep = has_tangles(realize(CoordCover(base, n, sig[t])).total, nu, r, budget)
                    keep[t] = 0 if rep.found else 1
                    flagged[n] |= rep.search_budget_exhausted
            for k in k_list:
                values[(k, n)].append((cover_traces(base, sig, k) - base_traces[k]) * keep)
            done += size
            stream += 1
    cells = {}
    for (k, n), parts in values.items():
        mean, err = _mean_stderr(np.concatenate(parts))
        cells[(k, n)] = ScanCell(mean, err, trials, flagged[n])
    return TraceScanResult(cells, trials, spec.seed, spec.kind, tangle_filter)


def _divisors(k: int) -> list[int]:
    return [j for j in range(1, k + 1) if k % j == 0]


def c0_prediction(base: Graph, k: int, h: Callable[[int], float] | None = None) -> float:
    h = h or (lambda _k: 0)
    return sum(hashimoto_trace(base, j) for j in _divisors(k)) - h(k) - hashimoto_trace(base, k)


# coefficient fit


@dataclass(frozen=True)
class CoefficientFit:
    k: int
    coeffs: tuple[float, ...]
    stderr: tuple[float, ...]
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]
    level: float
    residual: float


def fit_series(
    ns: Sequence[float],
    means: Sequence[float],
    stderrs: Sequence[float] | None,
    r: int,
    level: float = 0.99,
    k: int = 0,
) -> CoefficientFit:
    """Least squares of ``mean(n)`` on ``1, 1/n, ..., 1/n**(r-1)``.

    With positive standard errors the fit is weighted and the coefficient
    covariance is ``(X^T W X)^-1``.  Without them the fit is ordinary and the
    noise level is estimated from the residuals.  ``residual`` is the weighted
    (or plain) residual sum of squares.
    """
    ns = np.asarray(ns, dtype=float)
    y = np.asarray(means, dtype=float)
    if len(set(ns.tolist())) < r + 2:
        raise ValueError(f"need at least {r + 2} distinct n values for r = {r}")
    x = np.vander(1.0 / ns, r, increasing=True)
    weighted = stderrs is not None and np.all(np.asarray(stderrs) > 0)
    w = 1.0 / np.asarray(stderrs, dtype=float) if weighted else np.ones(len(ns))
    xw = x * w[:, None]
    yw = y * w
    if np.linalg.cond(xw) > 1e12:
        raise ValueError("design matrix is ill-conditioned; spread the n values")
    coef, *_ = np.linalg.lstsq(xw, yw, rcond=None)
    resid = float(np.sum((yw - xw @ coef) ** 2))
    cov = np.linalg.inv(xw.T @ xw)
    if not weighted:
        cov = cov * resid / (len(ns) - r)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    return CoefficientFit(
        k,
        tuple(float(c) for c in coef),
        tuple(float(s) for s in se),
        tuple(float(c - z * s) for c, s in zip(coef, se)),
        tuple(float(c + z * s) for c, s in zip(coef, se)),
        level,
        resid,
    )


def fit_coefficients(scan: TraceScanResult, k: int, r: int, level: float = 0.99) -> CoefficientFit:
    ns, means, errs = scan.series(k)
    return fit_series(ns, means, errs, r, level, k)


# non-Alon probability


@dataclass
class NonAlonScan:
    rows: list[tuple[int, float, float]]
    slope: float
    slope_stderr: float
    epsilon: float
    trials: int
    counts: dict[int, np.ndarray] = field(default_factory=dict, repr=False)


def loglog_slope(rows: Sequence[tuple[int, float, float]]) -> tuple[float, float]:
    """Weighted fit of ``log P`` on ``log n`` from ``(n, P, stderr)`` rows.

    Each point is weighted by ``P/stderr``, the delta-method error of ``log P``.
    Rows with ``P`` in ``{0, 1}`` are dropped; fewer than three usable rows give NaN.
    """
    usable = [(n, p, s) for n, p, s in rows if 0 < p < 1]
    if len(usable) < 3:
        return float("nan"), float("nan")
    ln = np.log([n for n, _, _ in usable])
    lp = np.log([p for _, p, _ in usable])
    w = np.array([p / s for _, p, s in usable])
    xw = np.column_stack([np.ones_like(ln), ln]) * w[:, None]
    coef, *_ = np.linalg.lstsq(xw, lp * w, rcond=None)
    cov = np.linalg.inv(xw.T @ xw)
    return float(coef[1]), float(math.sqrt(cov[1, 1]))


def nonalon_probability_scan(
    base: Graph,
    spec: ModelSpec,
    epsilon: float,
    n_list: Sequence[int],
    trials: int,
    chunk: int = 250,
) -> NonAlonScan:
    """Fraction of covers with a new eigenvalue beyond ``2 sqrt(d-1) + epsilon``.

    The slope comes from :func:`loglog_slope`.
    """
    d = base.is_regular()
    if d is None:
        raise ValueError("base must be regular")
    if trials < 1:
        raise ValueError("trials must be positive")
    thr = alon_bound(d) + epsilon
    base_spec = eigenvalues(adjacency_matrix(base))
    rows = []
    counts = {}
    for n in n_list:
        hits = []
        done, stream = 0, 0
        while done < trials:
            size = min(chunk, trials - done)
            sig = sample_batch(base, n, spec, size, stream=stream)
            spec_all = np.linalg.eigvalsh(cover_adjacency_batch(base, sig))[:, ::-1]
            new = new_spectrum_batch(spec_all, base_spec)
            hits.append((np.abs(new) > thr).sum(axis=1))
            done += size
            stream += 1
        c = np.concatenate(hits)
        counts[n] = c
        p = float(np.mean(c > 0))
        rows.append((n, p, math.sqrt(p * (1 - p) / trials)))
    slope, slope_se = loglog_slope(rows)
    return NonAlonScan(rows, slope, slope_se, epsilon, trials, counts)


# Markov bounds


def r_default(d: int) -> int:
    return 2 * math.floor(math.sqrt(d - 1) + 1)


def hashimoto_bound(d: int, r: int) -> float:
    q = d - 1
    return math.sqrt(q) * (q ** (1 / (2 * r)) + q ** (-1 / (2 * r)))


def markov_bounds(d: int, r: int) -> dict[str, float]:
    if d < 3 or r < 1:
        raise ValueError("need d >= 3 and r >= 1")
    rho = alon_bound(d)
    return {
        "d": d,
        "r": r,
        "adjacency_bound_as_written": d ** (1 / r) * rho ** (r / (r + 1)),
        "adjacency_bound_balanced": d ** (1 / (r + 1)) * rho ** (r / (r + 1)),
        "hashimoto_bound": hashimoto_bound(d, r),
        "r_default": r_default(d),
    }


PUDER_OFFSET = 0.86


def puder_comparison(d: int) -> dict[str, float]:
    if d < 3:
        raise ValueError("d must be at least 3")
    alon = alon_bound(d)
    hb = hashimoto_bound(d, d)
    return {
        "d": d,
        "alon": alon,
        "constant_offset_row": alon + PUDER_OFFSET,
        "hashimoto_at_r_eq_d": hb,
        "hashimoto_gap": hb - alon,
    }
