"""Coordinatized covers, the basic random models, and B-graphs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .graph_core import Graph, GraphError, components, graph_hash

MODEL_KINDS = (
    "permutation",
    "perm-involution-even",
    "perm-involution-odd",
    "cyclic",
    "cyclic-involution-even",
    "cyclic-involution-odd",
)

# spawn-key tags that keep single draws and batch draws on disjoint streams
_SINGLE_TAG = 0
_BATCH_TAG = 1


class ModelError(ValueError):
    """Model kind incompatible with the base graph or the degree."""


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}")
        if not 0 <= self.seed < 2**64:
            raise ModelError("seed must be a 64-bit unsigned integer")

    @property
    def is_cyclic(self) -> bool:
        return self.kind.startswith("cyclic")

    @property
    def involution_parity(self) -> str | None:
        if self.kind.endswith("-even"):
            return "even"
        if self.kind.endswith("-odd"):
            return "odd"
        return None


def check_compatible(base: Graph, n: int, spec: ModelSpec) -> None:
    if n < 1:
        raise ModelError("cover degree must be positive")
    has_half = any(base.is_half_loop(e) for e in range(base.num_dir_edges))
    parity = spec.involution_parity
    if parity is None and has_half:
        raise ModelError(f"model {spec.kind} does not allow half-loops in the base")
    if parity == "even" and n % 2:
        raise ModelError("even involution model needs even n")
    if parity == "odd" and n % 2 == 0:
        raise ModelError("odd involution model needs odd n")


# ordered B-graphs


@dataclass(frozen=True)
class Ordering:
    """Vertex order plus one directed edge per iota-orbit, in edge order."""

    vertex_order: tuple[int, ...]
    orientation: tuple[int, ...]

    @classmethod
    def natural(cls, g: Graph) -> "Ordering":
        return cls(tuple(range(g.num_vertices)), tuple(g.orbit_representatives()))

    def validate(self, g: Graph) -> None:
        if sorted(self.vertex_order) != list(range(g.num_vertices)):
            raise GraphError("vertex order is not a permutation of the vertices")
        orbits = sorted(min(e, g.iota[e]) for e in self.orientation)
        if orbits != g.orbit_representatives():
            raise GraphError("orientation must pick exactly one edge per orbit")


@dataclass(frozen=True)
class BGraph:
    total: Graph
    base: Graph
    vertex_map: tuple[int, ...]
    edge_map: tuple[int, ...]
    ordering: Ordering | None = None

    def __post_init__(self) -> None:
        s, b = self.total, self.base
        if len(self.vertex_map) != s.num_vertices or len(self.edge_map) != s.num_dir_edges:
            raise GraphError("structure maps have the wrong length")
        for e in range(s.num_dir_edges):
            f = self.edge_map[e]
            if not 0 <= f < b.num_dir_edges:
                raise GraphError(f"edge {e} maps outside the base")
            if self.vertex_map[s.tails[e]] != b.tails[f] or self.vertex_map[s.heads[e]] != b.heads[f]:
                raise GraphError(f"structure map does not preserve endpoints of edge {e}")
            if self.edge_map[s.iota[e]] != b.iota[f]:
                raise GraphError(f"structure map does not commute with iota at edge {e}")
        if self.ordering is not None:
            self.ordering.validate(s)

    def with_ordering(self, ordering: Ordering | None = None) -> "BGraph":
        return BGraph(
            self.total, self.base, self.vertex_map, self.edge_map,
            ordering or Ordering.natural(self.total),
        )


def is_etale(s: BGraph) -> bool:
    for v in range(s.total.num_vertices):
        images = [s.edge_map[e] for e in s.total.out_edges(v)]
        if len(set(images)) != len(images):
            return False
    return True


def is_covering(s: BGraph) -> bool:
    """True iff the structure map is bijective on every vertex star."""
    b = s.base
    for v in range(s.total.num_vertices):
        images = sorted(s.edge_map[e] for e in s.total.out_edges(v))
        if images != sorted(b.out_edges(s.vertex_map[v])):
            return False
    return True


def is_ordered_isomorphic(x: BGraph, y: BGraph) -> bool:
    """Ordered B-graphs admit at most one isomorphism; test that candidate."""
    if x.ordering is None or y.ordering is None:
        raise ValueError("both B-graphs need orderings")
    gx, gy = x.total, y.total
    if gx.num_vertices != gy.num_vertices or gx.num_dir_edges != gy.num_dir_edges:
        return False
    if len(x.ordering.orientation) != len(y.ordering.orientation):
        return False
    vmap = [0] * gx.num_vertices
    for a, b in zip(x.ordering.vertex_order, y.ordering.vertex_order):
        vmap[a] = b
    emap = [0] * gx.num_dir_edges
    for a, b in zip(x.ordering.orientation, y.ordering.orientation):
        if gx.is_half_loop(a) != gy.is_half_loop(b):
            return False
        emap[a] = b
        emap[gx.iota[a]] = gy.iota[b]
    for e in range(gx.num_dir_edges):
        f = emap[e]
        if vmap[gx.tails[e]] != gy.tails[f] or vmap[gx.heads[e]] != gy.heads[f]:
            return False
        if x.edge_map[e] != y.edge_map[f]:
            return False
    return all(x.vertex_map[v] == y.vertex_map[vmap[v]] for v in range(gx.num_vertices))


@dataclass(frozen=True)
class FibreCounts:
    a: tuple[int, ...]
    b: tuple[int, ...]


def fibre_counts(s: BGraph) -> FibreCounts:
    a = [0] * s.base.num_dir_edges
    b = [0] * s.base.num_vertices
    for f in s.edge_map:
        a[f] += 1
    for v in s.vertex_map:
        b[v] += 1
    return FibreCounts(tuple(a), tuple(b))


def bgraph_from_graph(g: Graph) -> BGraph:
    """``g`` as a B-graph over itself via the identity."""
    ids_v = tuple(range(g.num_vertices))
    ids_e = tuple(range(g.num_dir_edges))
    return BGraph(g, g, ids_v, ids_e, Ordering.natural(g))


# coordinatized covers


@dataclass(frozen=True)
class CoordCover:
    base: Graph
    n: int
    sigma: np.ndarray = field(compare=False)

    def __post_init__(self) -> None:
        sig = np.array(self.sigma, dtype=np.int64)
        if sig.shape != (self.base.num_dir_edges, self.n):
            raise GraphError("assignment must have shape (#dir edges, n)")
        ident = np.arange(self.n)
        for e in range(self.base.num_dir_edges):
            if not np.array_equal(np.sort(sig[e]), ident):
                raise GraphError(f"sigma({e}) is not a permutation")
            j = self.base.iota[e]
            if not np.array_equal(sig[j][sig[e]], ident):
                raise GraphError(f"sigma(iota {e}) is not the inverse of sigma({e})")
        sig.setflags(write=False)
        object.__setattr__(self, "sigma", sig)

    def to_text(self) -> str:
        lines = [f"cover {self.n} {graph_hash(self.base)}"]
        lines += [" ".join(str(int(x)) for x in row) for row in self.sigma]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, base: Graph, text: str) -> "CoordCover":
        rows: list[list[int]] = []
        n = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                if n is None:
                    if parts[0] != "cover" or len(parts) != 3:
                        raise GraphError("expected 'cover <n> <base-hash>'")
                    n = int(parts[1])
                    if parts[2] != graph_hash(base):
                        raise GraphError("base hash does not match the supplied base graph")
                else:
                    rows.append([int(x) for x in parts])
            except (GraphError, ValueError, IndexError) as exc:
                raise GraphError(f"line {lineno}: {exc}") from None
        if n is None:
            raise GraphError("missing 'cover' header")
        return cls(base, n, np.array(rows, dtype=np.int64).reshape(len(rows), n))


def identity_cover(base: Graph, n: int) -> CoordCover:
    return CoordCover(base, n, np.tile(np.arange(n), (base.num_dir_edges, 1)))


def realize(c: CoordCover) -> BGraph:
    b, n, sig = c.base, c.n, c.sigma
    tails, heads, iota, emap = [], [], [], []
    for e in range(b.num_dir_edges):
        for i in range(n):
            j = int(sig[e, i])
            tails.append(b.tails[e] * n + i)
            heads.append(b.heads[e] * n + j)
            iota.append(b.iota[e] * n + j)
            emap.append(e)
    total = Graph(b.num_vertices * n, tuple(tails), tuple(heads), tuple(iota))
    vmap = tuple(v for v in range(b.num_vertices) for _ in range(n))
    return BGraph(total, b, vmap, tuple(emap))


def cover_adjacency(c: CoordCover) -> np.ndarray:
    """Adjacency matrix of the realized cover without building the graph."""
    return cover_adjacency_batch(c.base, c.sigma[None])[0]


def cover_adjacency_batch(base: Graph, sigmas: np.ndarray) -> np.ndarray:
    t, m, n = sigmas.shape
    nv = base.num_vertices
    out = np.zeros((t, nv * n, nv * n))
    trial = np.arange(t)[:, None]
    for e in range(m):
        rows = base.tails[e] * n + np.arange(n)[None, :]
        cols = base.heads[e] * n + sigmas[:, e, :]
        np.add.at(out, (np.broadcast_to(trial, (t, n)), np.broadcast_to(rows, (t, n)), cols), 1.0)
    return out


# sampling


def _edge_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _assign_batch(
    base: Graph, n: int, spec: ModelSpec, trials: int, rng_for_edge
) -> np.ndarray:
    check_compatible(base, n, spec)
    sig = np.empty((trials, base.num_dir_edges, n), dtype=np.int64)
    rows = np.arange(trials)[:, None]
    ident = np.broadcast_to(np.arange(n), (trials, n))
    for e in base.orbit_representatives():
        rng = rng_for_edge(e)
        p = rng.permuted(np.array(ident), axis=1)
        s = np.empty_like(p)
        if base.is_half_loop(e):
            if spec.involution_parity == "odd":
                s[rows[:, 0], p[:, 0]] = p[:, 0]
                rest = p[:, 1:]
            else:
                rest = p
            s[rows, rest[:, 0::2]] = rest[:, 1::2]
            s[rows, rest[:, 1::2]] = rest[:, 0::2]
            sig[:, e, :] = s
            continue
        if spec.is_cyclic and base.is_whole_loop(e):
            s[rows, p] = np.roll(p, -1, axis=1)
        else:
            s = p
        sig[:, e, :] = s
        inv = np.empty_like(s)
        inv[rows, s] = ident
        sig[:, base.iota[e], :] = inv
    return sig


def sample(base: Graph, n: int, spec: ModelSpec, trial: int = 0) -> CoordCover:
    """One cover; the stream for edge orbit ``e`` is keyed by ``(trial, e)``."""
    sig = _assign_batch(base, n, spec, 1, lambda e: _edge_rng(spec.seed, _SINGLE_TAG, trial, e))
    return CoordCover(base, n, sig[0])


def sample_batch(base: Graph, n: int, spec: ModelSpec, trials: int, stream: int = 0) -> np.ndarray:
    """Assignments of ``trials`` independent covers as a ``(trials, #E_dir, n)`` array.

    Each edge orbit draws from its own substream keyed by ``(stream, e)``,
    so distinct ``stream`` values give independent batches.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    return _assign_batch(
        base, n, spec, trials, lambda e: _edge_rng(spec.seed, _BATCH_TAG, stream, n, e)
    )


def all_assignments(base: Graph, n: int, spec: ModelSpec) -> np.ndarray:
    """Every assignment in the support of the model, each equally likely."""
    from itertools import permutations, product

    check_compatible(base, n, spec)
    perms = [np.array(p) for p in permutations(range(n))]
    ident = np.arange(n)
    choices: list[list[np.ndarray]] = []
    reps = base.orbit_representatives()
    for e in reps:
        if base.is_half_loop(e):
            want = 1 if spec.involution_parity == "odd" else 0
            ok = [
                p for p in perms
                if np.array_equal(p[p], ident) and int((p == ident).sum()) == want
            ]
        elif spec.is_cyclic and base.is_whole_loop(e):
            ok = [p for p in perms if _is_full_cycle(p)]
        else:
            ok = perms
        choices.append(ok)
    out = []
    for combo in product(*choices):
        sig = np.empty((base.num_dir_edges, n), dtype=np.int64)
        for e, p in zip(reps, combo):
            sig[e] = p
            inv = np.empty_like(p)
            inv[p] = ident
            sig[base.iota[e]] = inv
        out.append(sig)
    return np.array(out, dtype=np.int64).reshape(len(out), base.num_dir_edges, n)


def _is_full_cycle(p: np.ndarray) -> bool:
    n = len(p)
    i, steps = 0, 0
    while True:
        i = int(p[i])
        steps += 1
        if i == 0:
            return steps == n


def cycle_type(p: Sequence[int]) -> tuple[int, ...]:
    seen = [False] * len(p)
    lengths = []
    for s in range(len(p)):
        if seen[s]:
            continue
        k, i = 0, s
        while not seen[i]:
            seen[i] = True
            i = int(p[i])
            k += 1
        lengths.append(k)
    return tuple(sorted(lengths, reverse=True))


# embedding counts


@dataclass(frozen=True)
class EmbeddingPlan:
    """Search order for mapping an etale B-graph into covers.

    Vertices are visited so that every non-root vertex has an earlier
    neighbour; its image is then forced by the assignment.  Each component
    is rooted on a shortest non-backtracking cycle whose base word is kept in
    ``root_word``: a root can only land on a fixed point of that word.
    """

    order: tuple[int, ...]
    parent: tuple[int, ...]
    parent_edge: tuple[int, ...]
    base_vertex: tuple[int, ...]
    check_ptr: tuple[int, ...]
    check_tail: tuple[int, ...]
    check_head: tuple[int, ...]
    check_edge: tuple[int, ...]
    root_word: tuple[tuple[int, ...] | None, ...] = ()

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.asarray(x, dtype=np.int64)
            for x in (
                self.parent, self.parent_edge, self.base_vertex,
                self.check_ptr, self.check_tail, self.check_head, self.check_edge,
            )
        )


def _shortest_cycle_from(g: Graph, root: int) -> list[int] | None:
    """Directed edges of a shortest closed non-backtracking walk at ``root``."""
    prev: dict[int, int] = {}
    frontier = list(g.out_edges(root))
    for e in frontier:
        prev[e] = -1
    while frontier:
        nxt = []
        for e in frontier:
            if g.heads[e] == root:
                path = [e]
                while prev[path[-1]] >= 0:
                    path.append(prev[path[-1]])
                return path[::-1]
            for f in g.out_edges(g.heads[e]):
                if f != g.iota[e] and f not in prev:
                    prev[f] = e
                    nxt.append(f)
        frontier = nxt
    return None


def embedding_plan(s: BGraph) -> EmbeddingPlan:
    g = s.total
    pos: dict[int, int] = {}
    order: list[int] = []
    parent: list[int] = []
    parent_edge: list[int] = []
    words: list[tuple[int, ...] | None] = []
    for comp in components(g):
        best: tuple[int, int, list[int] | None] = (0, comp[0], None)
        for v in comp:
            cyc = _shortest_cycle_from(g, v)
            if cyc is not None and (best[2] is None or len(cyc) < best[0]):
                best = (len(cyc), v, cyc)
        root = best[1]
        pos[root] = len(order)
        order.append(root)
        parent.append(-1)
        parent_edge.append(-1)
        words.append(None if best[2] is None else tuple(s.edge_map[e] for e in best[2]))
        queue = [root]
        while queue:
            u = queue.pop(0)
            for e in g.out_edges(u):
                w = g.heads[e]
                if w not in pos:
                    pos[w] = len(order)
                    order.append(w)
                    parent.append(pos[u])
                    parent_edge.append(s.edge_map[e])
                    words.append(None)
                    queue.append(w)
    checks: list[list[tuple[int, int, int]]] = [[] for _ in order]
    for e in g.orbit_representatives():
        a, b = pos[g.tails[e]], pos[g.heads[e]]
        checks[max(a, b)].append((a, b, s.edge_map[e]))
    ptr = [0]
    ct, ch, ce = [], [], []
    for lst in checks:
        for a, b, f in lst:
            ct.append(a)
            ch.append(b)
            ce.append(f)
        ptr.append(len(ct))
    return EmbeddingPlan(
        tuple(order), tuple(parent), tuple(parent_edge),
        tuple(s.vertex_map[v] for v in order),
        tuple(ptr), tuple(ct), tuple(ch), tuple(ce), tuple(words),
    )


def count_embeddings_batch(s: BGraph, sigmas: np.ndarray) -> np.ndarray:
    """Injective B-morphisms from ``s`` into each cover of a ``(T, #E_dir, n)`` batch."""
    return count_embeddings_many([s], sigmas)[0]


def count_embeddings_many(shapes: Sequence[BGraph], sigmas: np.ndarray) -> np.ndarray:
    """Row ``i`` is ``count_embeddings_batch(shapes[i], sigmas)``, computed in one pass.

    Fixed points of each distinct root word are found once per trial and
    shared by every shape using that word.
    """
    from ._kernels import count_embeddings_many_kernel

    sig = np.ascontiguousarray(sigmas, dtype=np.int64)
    out = np.zeros((len(shapes), sig.shape[0]), dtype=np.int64)
    live = []
    for i, s in enumerate(shapes):
        if s.total.num_dir_edges > 128:
            raise ValueError("B-graph too large for embedding counts (edge cap 64)")
        if not is_etale(s):
            continue
        if s.total.num_vertices == 0:
            out[i] = 1
            continue
        live.append(i)
    if not live:
        return out
    plans = [embedding_plan(shapes[i]) for i in live]
    word_id: dict[tuple[int, ...], int] = {}
    root_word = []
    for plan in plans:
        for w in plan.root_word:
            root_word.append(-1 if w is None else word_id.setdefault(w, len(word_id)))
    word_ptr = np.cumsum([0] + [len(w) for w in word_id]).astype(np.int64)
    word_edges = np.asarray([e for w in word_id for e in w], dtype=np.int64)
    arrays = [p.arrays() for p in plans]
    vptr = np.cumsum([0] + [len(p[0]) for p in arrays]).astype(np.int64)
    flat = [np.concatenate([p[j] for p in arrays]) for j in range(7)]
    out[live] = count_embeddings_many_kernel(
        sig, vptr, *flat, np.asarray(root_word, dtype=np.int64), word_ptr, word_edges
    )
    return out


def count_embeddings(s: BGraph, g: BGraph, edge_cap: int = 64) -> int:
    """Number of injective B-graph morphisms from ``s`` into ``g``.

    Vertices are placed by backtracking within base fibres; directed edges
    are then matched orbit by orbit, injectively and compatibly with iota.
    """
    if s.total.num_edges > edge_cap:
        raise ValueError(f"embedding counts are limited to {edge_cap} edges")
    if s.base != g.base:
        raise GraphError("B-graphs over different bases")
    S, G = s.total, g.total
    fibre: dict[int, list[int]] = {}
    for v in range(G.num_vertices):
        fibre.setdefault(g.vertex_map[v], []).append(v)
    # candidate G edges from x to y over base edge f
    lookup: dict[tuple[int, int, int], list[int]] = {}
    for e in range(G.num_dir_edges):
        lookup.setdefault((G.tails[e], G.heads[e], g.edge_map[e]), []).append(e)
    orbits = S.orbit_representatives()
    image = [-1] * S.num_vertices
    used_v: set[int] = set()

    def count_edges(i: int, used_e: set[int]) -> int:
        if i == len(orbits):
            return 1
        e = orbits[i]
        total = 0
        for cand in lookup.get((image[S.tails[e]], image[S.heads[e]], s.edge_map[e]), []):
            partner = G.iota[cand]
            if cand in used_e or (partner == cand) != S.is_half_loop(e):
                continue
            used_e.add(cand)
            used_e.add(partner)
            total += count_edges(i + 1, used_e)
            used_e.discard(cand)
            used_e.discard(partner)
        return total

    def place(v: int) -> int:
        if v == S.num_vertices:
            return count_edges(0, set())
        total = 0
        for w in fibre.get(s.vertex_map[v], []):
            if w in used_v:
                continue
            image[v] = w
            used_v.add(w)
            total += place(v + 1)
            used_v.discard(w)
        image[v] = -1
        return total

    return place(0)


def bgraph_from_fibres(
    base: Graph,
    fibre_sizes: Sequence[int],
    maps: dict[int, Iterable[tuple[int, int]]],
) -> BGraph:
    """Assemble a B-graph from fibre sizes and per-orbit partial maps.

    ``maps[e]`` lists pairs ``(i, j)`` meaning an edge over ``e`` from
    point ``i`` of the tail fibre to point ``j`` of the head fibre.  For a
    half-loop ``e`` a pair ``(i, i)`` is a half-loop and ``(i, j)`` with
    ``i < j`` is an edge whose both directions lie over ``e``.
    """
    offset = [0]
    for b in fibre_sizes:
        offset.append(offset[-1] + b)
    vmap = tuple(v for v, b in enumerate(fibre_sizes) for _ in range(b))
    tails: list[int] = []
    heads: list[int] = []
    iota: list[int] = []
    emap: list[int] = []
    for e in base.orbit_representatives():
        tv, hv = base.tails[e], base.heads[e]
        for i, j in maps.get(e, ()):
            x, y = offset[tv] + i, offset[hv] + j
            k = len(tails)
            if base.is_half_loop(e) and i == j:
                tails.append(x)
                heads.append(x)
                iota.append(k)
                emap.append(e)
            else:
                tails += [x, y]
                heads += [y, x]
                iota += [k + 1, k]
                emap += [e, base.iota[e]]
    total = Graph(offset[-1], tuple(tails), tuple(heads), tuple(iota))
    return BGraph(total, base, vmap, tuple(emap), Ordering.natural(total))
