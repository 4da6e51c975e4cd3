"""Tangles, relative trees, Shannon valence and the Rayleigh machinery."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .covers_models import (
    BGraph,
    ModelSpec,
    count_embeddings_batch,
    cover_adjacency_batch,
    is_covering,
    sample_batch,
)
from .graph_core import (
    Graph,
    GraphError,
    adjacency_matrix,
    degree_matrix,
    hashimoto_matrix,
    prune,
    stats,
    subgraph,
)
from .spectra import eigenvalues, new_spectrum_batch, perron_eigenvalue, symmetric_eigen


class RejectionBudgetExhausted(RuntimeError):
    pass


def mu1(psi: Graph, tol: float = 1e-13) -> float:
    """Perron eigenvalue of the Hashimoto matrix."""
    if psi.num_vertices == 0:
        raise GraphError("graph is empty")
    return perron_eigenvalue(hashimoto_matrix(psi), tol=tol)


def m_lower(d: int) -> int:
    if d < 3:
        raise ValueError("d must be at least 3")
    # floor((sqrt(d-1) - 1) / 2) only depends on floor(sqrt(d-1))
    return (math.isqrt(d - 1) - 1) // 2 + 1


def epsilon0(psi: Graph, d: int) -> float:
    mu = mu1(psi)
    root = math.sqrt(d - 1)
    if mu <= root:
        raise ValueError(f"mu1 = {mu} does not exceed sqrt(d-1) = {root}")
    return mu + (d - 1) / mu - 2.0 * root


def tree_radius(psi: Graph, d: int) -> float:
    if d < 3:
        raise ValueError("d must be at least 3")
    if max(psi.degrees(), default=0) > d:
        raise ValueError("psi has a vertex of degree above d")
    mu = mu1(psi)
    if mu <= math.sqrt(d - 1):
        raise ValueError("mu1(psi) must exceed sqrt(d-1)")
    return mu + (d - 1) / mu


# relative trees


def build_relative_tree(psi: Graph | BGraph, depth: int, d: int | None = None) -> Graph | BGraph:
    """Complete deficient vertices with fresh pendant edges, ``depth`` rounds.

    For a plain graph every vertex is completed to degree ``d``.  For a
    B-graph each vertex is completed to the star of its base vertex; a
    missing base half-loop is added as a half-loop.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if isinstance(psi, BGraph):
        return _relative_tree_over_base(psi, depth)
    if d is None:
        raise ValueError("a plain graph needs the target degree d")
    if max(psi.degrees(), default=0) > d:
        raise GraphError("psi has a vertex of degree above d")
    tails, heads, iota = list(psi.tails), list(psi.heads), list(psi.iota)
    nv = psi.num_vertices
    deg = list(psi.degrees())
    frontier = list(range(nv))
    for _ in range(depth):
        nxt = []
        for v in frontier:
            for _ in range(d - deg[v]):
                w = nv
                nv += 1
                deg.append(1)
                k = len(tails)
                tails += [v, w]
                heads += [w, v]
                iota += [k + 1, k]
                nxt.append(w)
            deg[v] = d
        frontier = nxt
    return Graph(nv, tuple(tails), tuple(heads), tuple(iota))


def _relative_tree_over_base(psi: BGraph, depth: int) -> BGraph:
    base = psi.base
    g = psi.total
    tails, heads, iota = list(g.tails), list(g.heads), list(g.iota)
    emap, vmap = list(psi.edge_map), list(psi.vertex_map)
    star: list[set[int]] = [set() for _ in range(g.num_vertices)]
    for e in range(g.num_dir_edges):
        star[g.tails[e]].add(psi.edge_map[e])
    frontier = list(range(g.num_vertices))
    for _ in range(depth):
        nxt = []
        for v in frontier:
            for f in base.out_edges(vmap[v]):
                if f in star[v]:
                    continue
                star[v].add(f)
                k = len(tails)
                if base.is_half_loop(f):
                    tails.append(v)
                    heads.append(v)
                    iota.append(k)
                    emap.append(f)
                    continue
                w = len(vmap)
                vmap.append(base.heads[f])
                star.append({base.iota[f]})
                tails += [v, w]
                heads += [w, v]
                iota += [k + 1, k]
                emap += [f, base.iota[f]]
                nxt.append(w)
        frontier = nxt
    total = Graph(len(vmap), tuple(tails), tuple(heads), tuple(iota))
    return BGraph(total, base, tuple(vmap), tuple(emap))


def relative_tree_quotient(psi: Graph, d: int, depth: int) -> np.ndarray:
    """Symmetrized quotient of the truncated tree's adjacency by depth layers.

    Each pendant tree hanging off ``psi`` is spherically symmetric, so the
    layers form an equitable partition.  The quotient has the same largest
    eigenvalue as the full adjacency matrix and stays small at any depth.
    """
    if max(psi.degrees(), default=0) > d:
        raise GraphError("psi has a vertex of degree above d")
    a = adjacency_matrix(psi)
    nv = psi.num_vertices
    deficits = [d - x for x in psi.degrees()]
    cells = nv + depth * sum(1 for x in deficits if x > 0)
    q = np.zeros((cells, cells))
    q[:nv, :nv] = a
    nxt = nv
    for v, deficit in enumerate(deficits):
        if deficit == 0 or depth == 0:
            continue
        prev = v
        for level in range(1, depth + 1):
            cell = nxt
            nxt += 1
            down = deficit if level == 1 else d - 1
            # down-degree into the layer, one edge back up to the parent
            q[prev, cell] = q[cell, prev] = math.sqrt(down * 1.0)
            prev = cell
    return q


def truncated_tree_radius(psi: Graph, d: int, depth: int, method: str = "quotient") -> float:
    """Largest adjacency eigenvalue of the depth-``depth`` relative tree."""
    if method == "quotient":
        return float(eigenvalues(relative_tree_quotient(psi, d, depth))[0])
    if method == "explicit":
        tree = build_relative_tree(psi, depth, d)
        return perron_eigenvalue(adjacency_matrix(tree), tol=1e-13)
    raise ValueError(f"unknown method {method!r}")


# Shannon valence


@dataclass(frozen=True)
class ShannonResult:
    valence: float
    z0: float
    bisection_residual: float


def _interior_resolvent(length: int, z: float) -> tuple[float, float]:
    """Walk generating function entries of a path with ``length - 1`` interior vertices.

    Returns ``(G_end_to_same_end, G_end_to_other_end)`` of ``(I - z P)^-1``.
    """
    m = length - 1
    p = np.zeros((m, m))
    idx = np.arange(m - 1)
    p[idx, idx + 1] = p[idx + 1, idx] = 1.0
    g = np.linalg.solve(np.eye(m) - z * p, np.eye(m)[:, [0, m - 1]])
    return float(g[0, 0]), float(g[0, 1])


def length_matrix(t: Graph, lengths: Sequence[int], z: float, walks: str = "directed") -> np.ndarray:
    """Generating matrix of excursions between vertices of ``t``.

    ``walks="directed"`` counts each directed edge as a directed path of its
    length, giving entries ``sum z**k(e)``.  ``walks="graph"`` counts all walks
    of the undirected variable-length graph between original vertices,
    including excursions that turn back inside a path.
    """
    nv = t.num_vertices
    zm = np.zeros((nv, nv))
    for e in range(t.num_dir_edges):
        k = lengths[e]
        u, w = t.tails[e], t.heads[e]
        if walks == "directed" or k == 1:
            zm[w, u] += z**k
        elif walks == "graph":
            same, other = _interior_resolvent(k, z)
            zm[w, u] += z * z * other
            zm[u, u] += z * z * same
        else:
            raise ValueError(f"unknown walk model {walks!r}")
    return zm


def shannon_valence(
    t: Graph, lengths: Sequence[int] | None = None, walks: str = "directed", tol: float = 1e-15
) -> ShannonResult:
    """Valence ``1/z0`` where the spectral radius of the length matrix crosses 1."""
    if lengths is None:
        lengths = [1] * t.num_dir_edges
    if len(lengths) != t.num_dir_edges or min(lengths, default=1) < 1:
        raise ValueError("need a positive length for every directed edge")
    if t.num_vertices == 0:
        raise ValueError("empty graph")
    cap = 1.0
    if walks == "graph" and max(lengths) > 2:
        # path resolvents diverge at 1 / (2 cos(pi / k)) for the longest length k
        cap = 1.0 / (2.0 * math.cos(math.pi / max(lengths)))
    vec = None

    def rho(z: float) -> float:
        nonlocal vec
        val, v = perron_eigenvalue(length_matrix(t, lengths, z, walks), tol=1e-14, start=vec, return_vector=True)
        if v.any():
            vec = v
        return val

    # rho is increasing in z; probe towards the cap so the matrix stays well scaled
    probes = [cap * (1.0 - 10.0**-j) for j in range(1, 13)]
    if cap == 1.0:
        probes.append(1.0)
    lo, hi = 1e-9, None
    for z in probes:
        if rho(z) >= 1.0:
            hi = z
            break
        lo = z
    if hi is None:
        raise ValueError("no crossing in the bracket: valence is at most 1")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if rho(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    z0 = 0.5 * (lo + hi)
    return ShannonResult(1.0 / z0, z0, abs(rho(z0) - 1.0))


def ihara_mu1(psi: Graph, tol: float = 1e-15) -> float:
    """``1/y0`` for the smallest positive root ``y0`` of ``det(I - yA + y^2(D - I))``.

    The determinant is positive at ``y = 0`` and first vanishes at
    ``1/mu1``; bisection runs on the sign of the smallest eigenvalue of the
    symmetric matrix, which is continuous in ``y``.
    """
    a = adjacency_matrix(psi)
    dm = degree_matrix(psi)
    ident = np.eye(psi.num_vertices)

    def smallest(y: float) -> float:
        return float(eigenvalues(ident - y * a + y * y * (dm - ident), "lapack")[-1])

    lo, hi = 0.0, 1.0
    if smallest(hi) > 0:
        raise ValueError("no root in (0, 1]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if smallest(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 1.0 / (0.5 * (lo + hi))


# walks on the rooted tree


def s_d_series(d: int, K: int) -> list[Fraction]:
    """Coefficients ``a_2..a_K`` of ``(1 - sqrt(1 - 4(d-1)z^2)) / 2``."""
    if d < 3:
        raise ValueError("d must be at least 3")
    if K > 40:
        raise ValueError("K must be at most 40")
    coeffs = [Fraction(0)] * (K + 1)
    binom = Fraction(1)
    for j in range(1, K // 2 + 1):
        binom = binom * (Fraction(1, 2) - (j - 1)) / j
        coeffs[2 * j] = -Fraction(1, 2) * binom * Fraction(-4 * (d - 1)) ** j
    return coeffs[2:]


def s_d(d: int, z: float) -> float:
    return (1.0 - math.sqrt(1.0 - 4.0 * (d - 1) * z * z)) / 2.0


def curious_identity_check(psi: Graph, d: int, z_samples: Sequence[float]) -> float:
    limit = 1.0 / (2.0 * math.sqrt(d - 1))
    a = adjacency_matrix(psi)
    dm = degree_matrix(psi)
    ident = np.eye(psi.num_vertices)
    worst = 0.0
    for z in z_samples:
        if not 0.0 < z < limit:
            raise ValueError(f"z = {z} outside (0, {limit})")
        s = s_d(d, z)
        zmat = z * a + s / (d - 1) * (d * ident - dm)
        y = z / (1.0 - s)
        lhs = ident - zmat
        rhs = (1.0 - s) * (ident - y * a + y * y * (dm - ident))
        worst = max(worst, float(np.abs(lhs - rhs).max(initial=0.0)))
    return worst


# tangle search


@dataclass(frozen=True)
class TangleReport:
    nu: float
    r: int
    found: bool
    witness: Graph | None = None
    witness_mu1: float | None = None
    witness_order: int | None = None
    search_budget_exhausted: bool = False


def has_tangles(
    g: Graph, nu: float, r: int, edge_budget: int = 12, candidate_cap: int = 200_000
) -> TangleReport:
    """Search for a connected subgraph of order below ``r`` with ``mu1 >= nu``.

    Connected edge sets of the 2-core are grown one orbit at a time in
    breadth-first order (so witnesses are as small as possible).  A found
    witness is always genuine; ``search_budget_exhausted`` reports that sets
    beyond ``edge_budget`` orbits or ``candidate_cap`` were not explored.
    """
    if nu <= 1:
        raise ValueError("nu must exceed 1")
    core = prune(g)
    if core.num_vertices == 0 or r <= 1:
        return TangleReport(nu, r, False)
    if mu1(core) < nu:
        return TangleReport(nu, r, False)
    reps = core.orbit_representatives()
    orbit_of = {e: min(e, core.iota[e]) for e in range(core.num_dir_edges)}
    incident: dict[int, set[int]] = {}
    for e in reps:
        for v in (core.tails[e], core.heads[e]):
            incident.setdefault(v, set()).add(e)

    def build(edge_set: frozenset[int]) -> Graph:
        es = [x for e in edge_set for x in {e, core.iota[e]}]
        vs = {core.tails[x] for x in es}
        return subgraph(core, vs, es)[0]

    level = {frozenset([e]) for e in reps}
    seen = set(level)
    explored = len(level)
    exhausted = False
    size = 1
    while level:
        nxt = set()
        for edges in sorted(level, key=sorted):
            sub = build(edges)
            st = stats(sub)
            if st.order >= r:
                continue
            if st.order >= 1:
                m = mu1(sub)
                if m >= nu:
                    w = prune(sub)
                    return TangleReport(nu, r, True, w, m, stats(w).order, False)
            if size == edge_budget:
                exhausted = True
                continue
            verts = {core.tails[e] for e in edges} | {core.heads[e] for e in edges}
            for v in verts:
                for f in incident[v]:
                    if f in edges:
                        continue
                    cand = edges | {orbit_of[f]}
                    if cand in seen:
                        continue
                    if explored >= candidate_cap:
                        exhausted = True
                        break
                    seen.add(cand)
                    explored += 1
                    nxt.add(cand)
        level = nxt
        size += 1
    return TangleReport(nu, r, False, search_budget_exhausted=exhausted)


# Rayleigh quotients and push-forward


def rayleigh(m: np.ndarray, f: np.ndarray) -> float:
    f = np.asarray(f, dtype=float)
    denom = float(f @ f)
    if denom == 0.0:
        raise ValueError("zero vector")
    return float(f @ (np.asarray(m, dtype=float) @ f)) / denom


def push_forward(pi: BGraph, f: np.ndarray) -> np.ndarray:
    """Sum of ``f`` over each fibre of the covering morphism ``pi``."""
    if not is_covering(pi):
        raise GraphError("push-forward needs a covering morphism")
    f = np.asarray(f, dtype=float)
    if f.shape != (pi.total.num_vertices,):
        raise ValueError("f must have one entry per vertex of the cover")
    return np.bincount(np.asarray(pi.vertex_map), weights=f, minlength=pi.base.num_vertices)


# fundamental subgraph experiment


@dataclass
class FundamentalRow:
    n: int
    conditioned: bool
    sampled: int
    accepted: int
    max_new: np.ndarray = field(repr=False)
    target: float

    def fraction_at_least(self, threshold: float) -> float:
        return float(np.mean(self.max_new >= threshold)) if len(self.max_new) else float("nan")


def _max_new_eigenvalues(base: Graph, sigmas: np.ndarray, chunk: int = 64) -> np.ndarray:
    base_spec = eigenvalues(adjacency_matrix(base))
    out = []
    for start in range(0, len(sigmas), chunk):
        adj = cover_adjacency_batch(base, sigmas[start : start + chunk])
        spec = np.linalg.eigvalsh(adj)[:, ::-1]
        new = new_spectrum_batch(spec, base_spec)
        out.append(new.max(axis=1) if new.shape[1] else np.full(len(new), -np.inf))
    return np.concatenate(out) if out else np.zeros(0)


def fundamental_subgraph_experiment(
    base: Graph,
    psi: BGraph,
    n_grid: Sequence[int],
    spec: ModelSpec,
    samples: int = 500,
    rejection_budget: int = 2_000_000,
    batch: int = 4000,
    contrast: bool = True,
) -> list[FundamentalRow]:
    """Max new eigenvalue of covers conditioned, by rejection, on containing ``psi``.

    With ``contrast`` each ``n`` also gets an unconditioned row.
    """
    d = base.is_regular()
    if d is None:
        raise ValueError("base must be regular")
    if psi.base != base:
        raise GraphError("psi is not a B-graph over the base")
    target = tree_radius(psi.total, d)
    rows = []
    for n in n_grid:
        kept = []
        have = 0
        sampled = 0
        stream = 0
        while have < samples:
            if sampled >= rejection_budget:
                raise RejectionBudgetExhausted(
                    f"only {have} of {samples} covers contained psi after {sampled} draws at n={n}"
                )
            size = min(batch, rejection_budget - sampled)
            sig = sample_batch(base, n, spec, size, stream=stream)
            stream += 1
            sampled += size
            hit = count_embeddings_batch(psi, sig) > 0
            take = sig[hit][: samples - have]
            kept.append(take)
            have += len(take)
        sig = np.concatenate(kept)
        rows.append(FundamentalRow(n, True, sampled, len(sig), _max_new_eigenvalues(base, sig), target))
        if contrast:
            plain = sample_batch(base, n, spec, samples, stream=10**6)
            rows.append(FundamentalRow(n, False, samples, samples, _max_new_eigenvalues(base, plain), target))
    return rows
