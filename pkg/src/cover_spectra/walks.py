"""Walks, visited subgraphs, coincidences, bead suppression and wordings."""

from __future__ import annotations

import gc
from collections import Counter
from dataclasses import dataclass
from itertools import repeat
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .covers_models import BGraph, CoordCover, Ordering, realize
from .graph_core import Graph, GraphError, stats


class BudgetExceeded(RuntimeError):
    """An enumeration would exceed its configured budget."""


class _WalkFields(NamedTuple):
    host: Graph
    edges: tuple[int, ...]
    start: int


class Walk(_WalkFields):
    """A walk in ``host``: directed edges in order from ``start``.

    Immutable and cheap to build, since enumerators produce millions.
    """

    __slots__ = ()

    def __new__(cls, host: Graph, edges: Sequence[int], start: int) -> "Walk":
        edges = tuple(edges)
        v = start
        if not 0 <= v < host.num_vertices:
            raise GraphError("start vertex out of range")
        for e in edges:
            if host.tails[e] != v:
                raise GraphError(f"edge {e} does not start at vertex {v}")
            v = host.heads[e]
        return tuple.__new__(cls, (host, edges, start))

    @classmethod
    def from_edges(cls, host: Graph, edges: Sequence[int]) -> "Walk":
        if not edges:
            raise GraphError("use Walk(host, (), v) for an empty walk")
        return cls(host, tuple(edges), host.tails[edges[0]])

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def vertices(self) -> tuple[int, ...]:
        vs = [self.start]
        for e in self.edges:
            vs.append(self.host.heads[e])
        return tuple(vs)

    @property
    def end(self) -> int:
        return self.host.heads[self.edges[-1]] if self.edges else self.start

    @property
    def is_closed(self) -> bool:
        return self.end == self.start

    @property
    def is_non_backtracking(self) -> bool:
        iota = self.host.iota
        return all(iota[a] != b for a, b in zip(self.edges, self.edges[1:]))

    @property
    def is_snbc(self) -> bool:
        return (
            bool(self.edges)
            and self.is_closed
            and self.is_non_backtracking
            and self.host.iota[self.edges[-1]] != self.edges[0]
        )


def _check_budget(g: Graph, k: int, budget: int) -> None:
    dmax = max(g.degrees(), default=0)
    estimate = g.num_dir_edges * max(dmax - 1, 1) ** (k - 1)
    if estimate > budget:
        raise BudgetExceeded(f"walk enumeration estimate {estimate} exceeds budget {budget}")


def iter_nb_walks(g: Graph, k: int) -> Iterator[tuple[int, ...]]:
    """All non-backtracking edge sequences of length ``k``."""
    path: list[int] = []

    def extend(e: int) -> Iterator[tuple[int, ...]]:
        path.append(e)
        if len(path) == k:
            yield tuple(path)
        else:
            for f in g.out_edges(g.heads[e]):
                if f != g.iota[e]:
                    yield from extend(f)
        path.pop()

    for e in range(g.num_dir_edges):
        yield from extend(e)


def _snbc_array(g: Graph, k: int) -> np.ndarray:
    """SNBC walks of length ``k`` as rows, ordered by first edge then successor order.

    Paths grow one level at a time; a step survives only if the walk can
    still return to its start in the remaining steps.
    """
    ne = g.num_dir_edges
    if ne == 0:
        return np.zeros((0, k), dtype=np.int64)
    heads = np.asarray(g.heads)
    tails = np.asarray(g.tails)
    iota = np.asarray(g.iota)
    nexts = [[f for f in g.out_edges(g.heads[e]) if f != g.iota[e]] for e in range(ne)]
    succ_count = np.array([len(x) for x in nexts], dtype=np.int64)
    succ_ptr = np.concatenate([[0], np.cumsum(succ_count)])
    succ = np.array([f for x in nexts for f in x], dtype=np.int64)
    # can[v, L, e]: a non-backtracking walk of L more edges after e ends at v
    can = np.zeros((g.num_vertices, k, ne), dtype=bool)
    can[:, 0, :] = heads[None, :] == np.arange(g.num_vertices)[:, None]
    owner = np.repeat(np.arange(ne), succ_count)
    for length in range(1, k):
        step = np.zeros((g.num_vertices, ne), dtype=bool)
        np.logical_or.at(step, (slice(None), owner), can[:, length - 1, succ])
        can[:, length, :] = step
    paths = np.arange(ne, dtype=np.int64)[can[tails, k - 1, np.arange(ne)]][:, None]
    for level in range(1, k):
        last = paths[:, -1]
        reps = succ_count[last]
        rows = np.repeat(np.arange(len(paths)), reps)
        offsets = np.arange(len(rows)) - np.repeat(np.cumsum(reps) - reps, reps)
        cand = succ[succ_ptr[last][rows] + offsets]
        keep = can[tails[paths[rows, 0]], k - 1 - level, cand]
        paths = np.hstack([paths[rows[keep]], cand[keep, None]])
    return paths[iota[paths[:, -1]] != paths[:, 0]]


def iter_snbc(g: Graph, k: int, budget: int = 10**7) -> Iterator[tuple[int, ...]]:
    if k < 1:
        raise ValueError("walk length must be positive")
    _check_budget(g, k, budget)
    yield from map(tuple, _snbc_array(g, k).tolist())


def enumerate_snbc(g: Graph, k: int, budget: int = 10**7) -> list[Walk]:
    # millions of small objects: collector passes would dominate the runtime
    enabled = gc.isenabled()
    gc.disable()
    try:
        if k < 1:
            raise ValueError("walk length must be positive")
        _check_budget(g, k, budget)
        paths = _snbc_array(g, k)
        starts = np.asarray(g.tails, dtype=np.int64)[paths[:, 0]].tolist()
        # tuple.__new__ through map/zip skips a Python-level call per walk
        rows = zip(repeat(g), map(tuple, paths.tolist()), starts)
        return list(map(tuple.__new__, repeat(Walk), rows))
    finally:
        if enabled:
            gc.enable()


def visited_subgraph_ordered(w: Walk, over: BGraph | None = None) -> BGraph:
    """Visited subgraph with the first-encountered ordering.

    Vertex ids follow first visit; each new edge orbit gets consecutive ids
    with the traversal direction first.  The result is a B-graph over
    ``over.base`` when the host carries a structure map, otherwise over the
    host itself through the inclusion.
    """
    g = w.host
    vpos: dict[int, int] = {w.start: 0}
    epos: dict[int, int] = {}
    tails: list[int] = []
    heads: list[int] = []
    iota: list[int] = []
    host_edges: list[int] = []
    orientation: list[int] = []
    for e in w.edges:
        h = g.heads[e]
        if h not in vpos:
            vpos[h] = len(vpos)
        if e in epos:
            continue
        k = len(tails)
        orientation.append(k)
        if g.is_half_loop(e):
            tails.append(vpos[g.tails[e]])
            heads.append(vpos[h])
            iota.append(k)
            host_edges.append(e)
            epos[e] = k
        else:
            j = g.iota[e]
            tails += [vpos[g.tails[e]], vpos[h]]
            heads += [vpos[h], vpos[g.tails[e]]]
            iota += [k + 1, k]
            host_edges += [e, j]
            epos[e] = k
            epos[j] = k + 1
    total = Graph(len(vpos), tuple(tails), tuple(heads), tuple(iota))
    host_vertices = sorted(vpos, key=vpos.get)
    ordering = Ordering(tuple(range(total.num_vertices)), tuple(orientation))
    if over is None:
        return BGraph(total, g, tuple(host_vertices), tuple(host_edges), ordering)
    if over.total != g:
        raise GraphError("walk host differs from the B-graph total graph")
    return BGraph(
        total,
        over.base,
        tuple(over.vertex_map[v] for v in host_vertices),
        tuple(over.edge_map[e] for e in host_edges),
        ordering,
    )


# coincidences


FORCED, COINCIDENCE, NEW = "forced", "coincidence", "new"


@dataclass(frozen=True)
class WalkRecord:
    base_walk: Walk
    i0: int
    trajectory: tuple[int, ...]
    classes: tuple[str, ...]
    orders: tuple[int, ...]
    final: Graph

    @property
    def coincidences(self) -> int:
        return self.classes.count(COINCIDENCE)


def classify_steps(base_walk: Walk, i0: int, c: CoordCover) -> WalkRecord:
    """Classify each step of the lift of ``base_walk`` starting at fibre point ``i0``.

    A step is forced when its edge orbit was already traversed, a
    coincidence when it adds an edge but reaches a visited vertex, and new
    otherwise.  Orders of the growing visited subgraph are tracked directly.
    """
    b = base_walk.host
    if b != c.base:
        raise GraphError("walk is not in the cover's base graph")
    if not 0 <= i0 < c.n:
        raise ValueError("start index out of range")
    sig = c.sigma
    vid = {(base_walk.start, i0): 0}
    visited_e: set[tuple[int, int]] = set()
    tails: list[int] = []
    heads: list[int] = []
    iota: list[int] = []
    traj = [i0]
    classes: list[str] = []
    orders = [-1]
    i = i0
    order = -1
    for e in base_walk.edges:
        j = int(sig[e, i])
        lifted = (e, i)
        if lifted in visited_e:
            classes.append(FORCED)
        else:
            partner = (b.iota[e], j)
            visited_e.add(lifted)
            visited_e.add(partner)
            head = (b.heads[e], j)
            if head in vid:
                classes.append(COINCIDENCE)
                order += 1
            else:
                classes.append(NEW)
                vid[head] = len(vid)
            k = len(tails)
            x, y = vid[(b.tails[e], i)], vid[head]
            if partner == lifted:
                tails.append(x)
                heads.append(y)
                iota.append(k)
            else:
                tails += [x, y]
                heads += [y, x]
                iota += [k + 1, k]
        orders.append(order)
        traj.append(j)
        i = j
    final = Graph(len(vid), tuple(tails), tuple(heads), tuple(iota))
    return WalkRecord(base_walk, i0, tuple(traj), tuple(classes), tuple(orders), final)


def lift_walk(base_walk: Walk, i0: int, c: CoordCover, realized: BGraph | None = None) -> Walk:
    """The lift to the realized cover, using its edge ids ``e*n + i``."""
    g = (realized or realize(c)).total
    n = c.n
    edges = []
    i = i0
    for e in base_walk.edges:
        edges.append(e * n + i)
        i = int(c.sigma[e, i])
    return Walk(g, tuple(edges), base_walk.start * n + i0)


# bead suppression and variable-length graphs


@dataclass(frozen=True)
class HomotopyData:
    reduction: Graph
    ordering: Ordering
    edge_lengths: tuple[int, ...]
    suppressed: frozenset[int]
    paths: tuple[tuple[int, ...], ...]
    kept_vertices: tuple[int, ...]


def beads(g: Graph) -> set[int]:
    return {v for v in range(g.num_vertices) if g.degree(v) == 2 and not g.has_self_loop_at(v)}


def suppress_beads(g: Graph, bead_set, ordering: Ordering | None = None) -> HomotopyData:
    """Contract every path through suppressed beads into a single edge.

    Reduction vertices keep their relative order.  Reduction edges are
    ordered by the first original edge (in the given ordering) lying on
    their path, oriented the way that edge is oriented.  ``paths[e]`` is the
    original directed-edge sequence represented by reduction edge ``e``.
    """
    sup = frozenset(bead_set)
    ordering = ordering or Ordering.natural(g)
    all_beads = beads(g)
    if not sup <= all_beads:
        raise GraphError(f"vertices {sorted(sup - all_beads)} are not beads")
    kept = [v for v in ordering.vertex_order if v not in sup]
    from .graph_core import components

    for comp in components(g):
        if all(v in sup for v in comp):
            raise GraphError("a connected component consists only of suppressed beads")
    edge_rank = {}
    for r, e in enumerate(ordering.orientation):
        edge_rank[e] = (r, 0)
        edge_rank[g.iota[e]] = (r, 1)

    def follow(e: int) -> tuple[int, ...]:
        path = [e]
        while g.heads[path[-1]] in sup:
            v = g.heads[path[-1]]
            back = g.iota[path[-1]]
            nxt = [f for f in g.out_edges(v) if f != back]
            path.append(nxt[0])
        return tuple(path)

    seen: set[int] = set()
    raw_paths: list[tuple[int, ...]] = []
    for v in kept:
        for e in g.out_edges(v):
            if e in seen:
                continue
            p = follow(e)
            rev = tuple(g.iota[f] for f in reversed(p))
            seen.update(p)
            seen.update(rev)
            # orient by the earliest original edge on the path
            key_p = min(edge_rank[f] for f in p)
            key_r = min(edge_rank[f] for f in rev)
            raw_paths.append(p if key_p <= key_r else rev)
    raw_paths.sort(key=lambda p: min(edge_rank[f][0] for f in p))
    vpos = {v: i for i, v in enumerate(kept)}
    tails: list[int] = []
    heads: list[int] = []
    iota: list[int] = []
    paths: list[tuple[int, ...]] = []
    orientation: list[int] = []
    for p in raw_paths:
        rev = tuple(g.iota[f] for f in reversed(p))
        k = len(tails)
        orientation.append(k)
        t, h = vpos[g.tails[p[0]]], vpos[g.heads[p[-1]]]
        if rev == p:
            tails.append(t)
            heads.append(h)
            iota.append(k)
            paths.append(p)
        else:
            tails += [t, h]
            heads += [h, t]
            iota += [k + 1, k]
            paths += [p, rev]
    reduction = Graph(len(kept), tuple(tails), tuple(heads), tuple(iota))
    return HomotopyData(
        reduction,
        Ordering(tuple(range(len(kept))), tuple(orientation)),
        tuple(len(p) for p in paths),
        sup,
        tuple(paths),
        tuple(kept),
    )


def vlg(t: Graph, lengths: Sequence[int], ordering: Ordering | None = None) -> tuple[Graph, Ordering]:
    """Variable-length graph: each edge orbit becomes a path of its length.

    ``lengths`` is indexed by directed edge and must agree on iota-orbits.
    Original vertices come first; new path vertices follow in edge order.
    Returns the graph and the ordering induced from ``ordering``.
    """
    ordering = ordering or Ordering.natural(t)
    for e in range(t.num_dir_edges):
        if lengths[e] < 1:
            raise GraphError("edge lengths must be positive")
        if lengths[t.iota[e]] != lengths[e]:
            raise GraphError("edge lengths must be constant on iota-orbits")
        if t.is_half_loop(e) and lengths[e] != 1:
            raise GraphError("half-loops have length 1")
    vrank = {v: i for i, v in enumerate(ordering.vertex_order)}
    nv = t.num_vertices
    tails: list[int] = []
    heads: list[int] = []
    iota: list[int] = []
    orientation: list[int] = []
    new_vertices: list[int] = []
    for e in ordering.orientation:
        k = len(tails)
        if t.is_half_loop(e):
            tails.append(t.tails[e])
            heads.append(t.heads[e])
            iota.append(k)
            orientation.append(k)
            continue
        chain = [t.tails[e]]
        for _ in range(lengths[e] - 1):
            chain.append(nv + len(new_vertices))
            new_vertices.append(chain[-1])
        chain.append(t.heads[e])
        for a, b in zip(chain, chain[1:]):
            k = len(tails)
            tails += [a, b]
            heads += [b, a]
            iota += [k + 1, k]
            orientation.append(k)
    g = Graph(nv + len(new_vertices), tuple(tails), tuple(heads), tuple(iota))
    vorder = tuple(sorted(range(nv), key=vrank.get)) + tuple(new_vertices)
    return g, Ordering(vorder, tuple(orientation))


def induced_wording(w: Walk, structure: BGraph) -> tuple[HomotopyData, dict[int, tuple[int, ...]]]:
    """Reduction of the visited subgraph and the base-edge string on each reduction edge.

    All beads except the walk's endpoints are suppressed.
    """
    if not w.is_non_backtracking:
        raise ValueError("wordings need a non-backtracking walk")
    s = visited_subgraph_ordered(w, structure)
    keep = {0, _end_position(w)}
    sup = beads(s.total) - keep
    data = suppress_beads(s.total, sup, s.ordering)
    wording = {e: tuple(s.edge_map[f] for f in p) for e, p in enumerate(data.paths)}
    return data, wording


def _end_position(w: Walk) -> int:
    seen: dict[int, int] = {}
    for v in w.vertices:
        seen.setdefault(v, len(seen))
    return seen[w.end]


# order census


def snbc_order_census(c: CoordCover, k: int, budget: int = 10**7) -> dict[int, int]:
    """SNBC walks of length ``k`` in the cover, counted by order of their support.

    Works from lifts of base walks: a base SNBC walk started at ``i`` lifts
    to a closed walk iff the trajectory returns to ``i``, and its order is
    the number of coincidences minus one.
    """
    b = c.base
    census: Counter[int] = Counter()
    for bw in iter_snbc(b, k, budget):
        walk = Walk(b, bw, b.tails[bw[0]])
        for i0 in range(c.n):
            j = i0
            for e in bw:
                j = int(c.sigma[e, j])
            if j != i0:
                continue
            census[_order_by_coincidences(walk, i0, c)] += 1
    return dict(sorted(census.items()))


def _order_by_coincidences(walk: Walk, i0: int, c: CoordCover) -> int:
    b = walk.host
    sig = c.sigma
    visited_v = {(walk.start, i0)}
    visited_e: set[tuple[int, int]] = set()
    coinc = 0
    i = i0
    for e in walk.edges:
        j = int(sig[e, i])
        if (e, i) not in visited_e:
            visited_e.add((e, i))
            visited_e.add((b.iota[e], j))
            head = (b.heads[e], j)
            if head in visited_v:
                coinc += 1
            else:
                visited_v.add(head)
        i = j
    return coinc - 1


def snbc_order_census_direct(g: Graph, k: int, budget: int = 10**7) -> dict[int, int]:
    """Census computed from visited subgraphs of walks enumerated in ``g`` itself."""
    census: Counter[int] = Counter()
    for w in iter_snbc(g, k, budget):
        walk = Walk(g, w, g.tails[w[0]])
        census[stats(visited_subgraph_ordered(walk).total).order] += 1
    return dict(sorted(census.items()))


def census_tsv(census: dict[int, int], k: int) -> str:
    lines = ["#k\torder\tcount"] + [f"{k}\t{o}\t{c}" for o, c in sorted(census.items())]
    return "\n".join(lines) + "\n"


def random_nb_walk(g: Graph, k: int, rng: np.random.Generator) -> Walk | None:
    """Uniform-step random non-backtracking walk, or None if it gets stuck."""
    if g.num_dir_edges == 0:
        return None
    edges = [int(rng.integers(g.num_dir_edges))]
    for _ in range(k - 1):
        last = edges[-1]
        options = [f for f in g.out_edges(g.heads[last]) if f != g.iota[last]]
        if not options:
            return None
        edges.append(options[int(rng.integers(len(options)))])
    return Walk(g, tuple(edges), g.tails[edges[0]])
