"""Graphs with an involution on directed edges.

A graph is stored as flat arrays ``tails``, ``heads`` and ``iota`` indexed by
directed-edge id.  Half-loops are the fixed points of ``iota``; a whole-loop
is a two-element orbit whose edges share both endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised when graph data violates a structural invariant."""


@dataclass(frozen=True)
class DiGraph:
    vertex_count: int
    dir_edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.vertex_count < 0:
            raise GraphError("vertex_count must be non-negative")
        for t, h in self.dir_edges:
            if not (0 <= t < self.vertex_count and 0 <= h < self.vertex_count):
                raise GraphError(f"edge ({t}, {h}) has an endpoint out of range")


@dataclass(frozen=True)
class GraphStats:
    order: int
    euler_char: Fraction
    half_loop_count: int
    non_half_edge_count: int
    degree_sequence: tuple[int, ...]


@dataclass(frozen=True)
class Graph:
    num_vertices: int
    tails: tuple[int, ...]
    heads: tuple[int, ...]
    iota: tuple[int, ...]
    _out: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        m = len(self.tails)
        if len(self.heads) != m or len(self.iota) != m:
            raise GraphError("tails, heads and iota must have equal length")
        if self.num_vertices < 0:
            raise GraphError("num_vertices must be non-negative")
        for e in range(m):
            t, h, j = self.tails[e], self.heads[e], self.iota[e]
            if not (0 <= t < self.num_vertices and 0 <= h < self.num_vertices):
                raise GraphError(f"edge {e} has an endpoint out of range")
            if not 0 <= j < m:
                raise GraphError(f"iota({e}) = {j} is out of range")
            if self.iota[j] != e:
                raise GraphError(f"iota is not an involution at edge {e}")
            if self.tails[j] != h:
                raise GraphError(f"tail(iota({e})) != head({e})")
        out: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for e, t in enumerate(self.tails):
            out[t].append(e)
        object.__setattr__(self, "_out", tuple(tuple(x) for x in out))

    # construction helpers

    @classmethod
    def from_edges(
        cls,
        num_vertices: int,
        edges: Iterable[tuple[int, int]] = (),
        half_loops: Iterable[int] = (),
    ) -> "Graph":
        """Build a graph from undirected edges and half-loop vertices.

        Edge ``k`` of ``edges`` becomes directed edges ``2k`` (u to v) and
        ``2k+1`` (v to u); half-loops are appended afterwards.
        """
        tails: list[int] = []
        heads: list[int] = []
        iota: list[int] = []
        for u, v in edges:
            e = len(tails)
            tails += [u, v]
            heads += [v, u]
            iota += [e + 1, e]
        for v in half_loops:
            e = len(tails)
            tails.append(v)
            heads.append(v)
            iota.append(e)
        return cls(num_vertices, tuple(tails), tuple(heads), tuple(iota))

    @property
    def digraph(self) -> DiGraph:
        return DiGraph(self.num_vertices, tuple(zip(self.tails, self.heads)))

    @property
    def num_dir_edges(self) -> int:
        return len(self.tails)

    def out_edges(self, v: int) -> tuple[int, ...]:
        return self._out[v]

    def is_half_loop(self, e: int) -> bool:
        return self.iota[e] == e

    def is_whole_loop(self, e: int) -> bool:
        return self.iota[e] != e and self.tails[e] == self.heads[e]

    def orbit_representatives(self) -> list[int]:
        """Smallest directed-edge id of every iota-orbit, ascending."""
        return [e for e in range(self.num_dir_edges) if e <= self.iota[e]]

    @property
    def num_edges(self) -> int:
        return len(self.orbit_representatives())

    def degree(self, v: int) -> int:
        return len(self._out[v])

    def degrees(self) -> tuple[int, ...]:
        return tuple(len(x) for x in self._out)

    def has_self_loop_at(self, v: int) -> bool:
        return any(self.heads[e] == v for e in self._out[v])

    def is_connected(self) -> bool:
        if self.num_vertices == 0:
            return True
        return len(components(self)) == 1

    def is_regular(self) -> int | None:
        degs = set(self.degrees())
        return degs.pop() if len(degs) == 1 else None


# named families


def cycle_graph(k: int) -> Graph:
    if k < 1:
        raise GraphError("cycle length must be positive")
    return Graph.from_edges(k, [(i, (i + 1) % k) for i in range(k)])


def path_graph(k: int) -> Graph:
    """Path with ``k`` vertices."""
    return Graph.from_edges(k, [(i, i + 1) for i in range(k - 1)])


def bouquet(whole_loops: int, half_loops: int = 0) -> Graph:
    return Graph.from_edges(1, [(0, 0)] * whole_loops, [0] * half_loops)


def figure_eight() -> Graph:
    return bouquet(2)


def theta_graph() -> Graph:
    return Graph.from_edges(2, [(0, 1)] * 3)


def random_graph(
    rng: np.random.Generator,
    max_vertices: int,
    max_extra_edges: int = 6,
    half_loop_prob: float = 0.15,
    whole_loop_prob: float = 0.15,
    connected: bool = True,
) -> Graph:
    """A random multigraph, optionally connected, with loops of both kinds."""
    nv = int(rng.integers(1, max_vertices + 1))
    edges: list[tuple[int, int]] = []
    if connected:
        for v in range(1, nv):
            edges.append((int(rng.integers(0, v)), v))
    for _ in range(int(rng.integers(0, max_extra_edges + 1))):
        u = int(rng.integers(0, nv))
        if rng.random() < whole_loop_prob:
            edges.append((u, u))
        else:
            edges.append((u, int(rng.integers(0, nv))))
    halves = [v for v in range(nv) if rng.random() < half_loop_prob]
    perm = rng.permutation(len(edges))
    return Graph.from_edges(nv, [edges[i] for i in perm], halves)


# matrices and statistics


def adjacency_matrix(g: Graph) -> np.ndarray:
    a = np.zeros((g.num_vertices, g.num_vertices))
    np.add.at(a, (np.asarray(g.tails, dtype=np.intp), np.asarray(g.heads, dtype=np.intp)), 1.0)
    return a


def degree_matrix(g: Graph) -> np.ndarray:
    return np.diag(np.asarray(g.degrees(), dtype=float))


def hashimoto_matrix(g: Graph) -> np.ndarray:
    m = g.num_dir_edges
    h = np.zeros((m, m))
    for e1 in range(m):
        for e2 in g.out_edges(g.heads[e1]):
            if e2 != g.iota[e1]:
                h[e1, e2] = 1.0
    return h


def hashimoto_sparse(g: Graph):
    """Integer CSR Hashimoto matrix."""
    from scipy.sparse import csr_matrix

    rows: list[int] = []
    cols: list[int] = []
    for e1 in range(g.num_dir_edges):
        for e2 in g.out_edges(g.heads[e1]):
            if e2 != g.iota[e1]:
                rows.append(e1)
                cols.append(e2)
    m = g.num_dir_edges
    data = np.ones(len(rows), dtype=np.int64)
    return csr_matrix((data, (rows, cols)), shape=(m, m), dtype=np.int64)


def stats(g: Graph) -> GraphStats:
    half = sum(1 for e in range(g.num_dir_edges) if g.is_half_loop(e))
    orbits = (g.num_dir_edges + half) // 2
    return GraphStats(
        order=orbits - g.num_vertices,
        euler_char=Fraction(g.num_vertices) - Fraction(g.num_dir_edges, 2),
        half_loop_count=half,
        non_half_edge_count=orbits - half,
        degree_sequence=g.degrees(),
    )


def order(g: Graph) -> int:
    return stats(g).order


# subgraphs and transformations


def components(g: Graph) -> list[list[int]]:
    parent = list(range(g.num_vertices))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, h in zip(g.tails, g.heads):
        a, b = find(t), find(h)
        if a != b:
            parent[a] = b
    groups: dict[int, list[int]] = {}
    for v in range(g.num_vertices):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def subgraph(
    g: Graph, vertices: Iterable[int], dir_edges: Iterable[int]
) -> tuple[Graph, tuple[int, ...], tuple[int, ...]]:
    """Subgraph on the given vertices and iota-closed edge set.

    Ids are renumbered in ascending order of the originals.  Returns the
    subgraph with its vertex and edge inclusion maps.
    """
    vs = sorted(set(vertices))
    es = sorted(set(dir_edges))
    eset = set(es)
    vpos = {v: i for i, v in enumerate(vs)}
    epos = {e: i for i, e in enumerate(es)}
    for e in es:
        if g.iota[e] not in eset:
            raise GraphError("edge set is not closed under iota")
        if g.tails[e] not in vpos or g.heads[e] not in vpos:
            raise GraphError("edge endpoint missing from vertex set")
    sub = Graph(
        len(vs),
        tuple(vpos[g.tails[e]] for e in es),
        tuple(vpos[g.heads[e]] for e in es),
        tuple(epos[g.iota[e]] for e in es),
    )
    return sub, tuple(vs), tuple(es)


def prune_support(g: Graph) -> tuple[list[int], list[int]]:
    """Vertices and directed edges that survive iterated leaf removal."""
    alive_v = [True] * g.num_vertices
    alive_e = [True] * g.num_dir_edges
    deg = list(g.degrees())
    stack = [v for v in range(g.num_vertices) if deg[v] <= 1]
    while stack:
        v = stack.pop()
        if not alive_v[v]:
            continue
        alive_v[v] = False
        for e in g.out_edges(v):
            if not alive_e[e]:
                continue
            j = g.iota[e]
            alive_e[e] = alive_e[j] = False
            w = g.heads[e]
            if w != v:
                deg[w] -= 1
                if alive_v[w] and deg[w] <= 1:
                    stack.append(w)
    vs = [v for v in range(g.num_vertices) if alive_v[v]]
    es = [e for e in range(g.num_dir_edges) if alive_e[e]]
    return vs, es


def prune(g: Graph) -> Graph:
    vs, es = prune_support(g)
    return subgraph(g, vs, es)[0]


def is_pruned(g: Graph) -> bool:
    return all(d >= 2 for d in g.degrees())


def subdivide_edge(g: Graph, e: int, s: int) -> Graph:
    """Replace the orbit of ``e`` by a path of ``s`` edges.

    Other edges keep their relative order; the path's directed edges are
    appended, the ``e`` direction first along each segment.
    """
    if s < 1:
        raise GraphError("subdivision length must be positive")
    if g.is_half_loop(e):
        raise GraphError("cannot subdivide a half-loop")
    j = g.iota[e]
    keep = [x for x in range(g.num_dir_edges) if x not in (e, j)]
    pos = {x: i for i, x in enumerate(keep)}
    tails = [g.tails[x] for x in keep]
    heads = [g.heads[x] for x in keep]
    iota = [pos[g.iota[x]] for x in keep]
    nv = g.num_vertices
    chain = [g.tails[e]] + list(range(nv, nv + s - 1)) + [g.heads[e]]
    for a, b in zip(chain, chain[1:]):
        k = len(tails)
        tails += [a, b]
        heads += [b, a]
        iota += [k + 1, k]
    return Graph(nv + s - 1, tuple(tails), tuple(heads), tuple(iota))


def relabel(g: Graph, vertex_perm: Sequence[int], edge_perm: Sequence[int]) -> Graph:
    """Graph with vertex ``v`` renamed ``vertex_perm[v]`` and edge ``e`` renamed ``edge_perm[e]``."""
    m = g.num_dir_edges
    tails = [0] * m
    heads = [0] * m
    iota = [0] * m
    for e in range(m):
        f = edge_perm[e]
        tails[f] = vertex_perm[g.tails[e]]
        heads[f] = vertex_perm[g.heads[e]]
        iota[f] = edge_perm[g.iota[e]]
    return Graph(g.num_vertices, tuple(tails), tuple(heads), tuple(iota))


def disjoint_union(a: Graph, b: Graph) -> Graph:
    off_v, off_e = a.num_vertices, a.num_dir_edges
    return Graph(
        a.num_vertices + b.num_vertices,
        a.tails + tuple(t + off_v for t in b.tails),
        a.heads + tuple(h + off_v for h in b.heads),
        a.iota + tuple(j + off_e for j in b.iota),
    )


# isomorphism


def _edge_profile(g: Graph) -> tuple[dict[tuple[int, int], int], list[int], list[int]]:
    between: dict[tuple[int, int], int] = {}
    whole = [0] * g.num_vertices
    half = [0] * g.num_vertices
    for e in g.orbit_representatives():
        u, v = g.tails[e], g.heads[e]
        if g.is_half_loop(e):
            half[u] += 1
        elif u == v:
            whole[u] += 1
        else:
            key = (min(u, v), max(u, v))
            between[key] = between.get(key, 0) + 1
    return between, whole, half


def is_isomorphic(g1: Graph, g2: Graph, size_cap: int = 24) -> bool:
    """Exact isomorphism test for graphs with involutions.

    Two graphs are isomorphic iff some vertex bijection preserves the number
    of non-loop edges between every pair and the numbers of whole-loops and
    half-loops at every vertex; matching edges can then be chosen freely.
    """
    if g1.num_vertices > size_cap or g2.num_vertices > size_cap:
        raise GraphError(f"isomorphism test limited to {size_cap} vertices")
    if g1.num_vertices != g2.num_vertices or g1.num_dir_edges != g2.num_dir_edges:
        return False
    b1, w1, h1 = _edge_profile(g1)
    b2, w2, h2 = _edge_profile(g2)
    n = g1.num_vertices
    sig1 = [(g1.degree(v), w1[v], h1[v]) for v in range(n)]
    sig2 = [(g2.degree(v), w2[v], h2[v]) for v in range(n)]
    if sorted(sig1) != sorted(sig2):
        return False
    nbr1 = [dict() for _ in range(n)]
    nbr2 = [dict() for _ in range(n)]
    for (u, v), c in b1.items():
        nbr1[u][v] = c
        nbr1[v][u] = c
    for (u, v), c in b2.items():
        nbr2[u][v] = c
        nbr2[v][u] = c
    # most constrained vertices first: high degree, then by adjacency to placed ones
    order_: list[int] = []
    remaining = set(range(n))
    while remaining:
        best = max(
            remaining,
            key=lambda v: (sum(1 for u in order_ if u in nbr1[v]), sig1[v][0], -v),
        )
        order_.append(best)
        remaining.remove(best)
    image = [-1] * n
    used = [False] * n

    def extend(i: int) -> bool:
        if i == n:
            return True
        v = order_[i]
        for w in range(n):
            if used[w] or sig2[w] != sig1[v]:
                continue
            ok = True
            for u in order_[:i]:
                if nbr1[v].get(u, 0) != nbr2[w].get(image[u], 0):
                    ok = False
                    break
            if not ok:
                continue
            image[v] = w
            used[w] = True
            if extend(i + 1):
                return True
            used[w] = False
            image[v] = -1
        return False

    return extend(0)


# serialization


def to_text(g: Graph) -> str:
    lines = [f"graph {g.num_vertices} {g.num_dir_edges}"]
    lines += [f"e {t} {h} {j}" for t, h, j in zip(g.tails, g.heads, g.iota)]
    return "\n".join(lines) + "\n"


def from_text(text: str) -> Graph:
    """Parse the line format written by :func:`to_text`.

    Blank lines and lines starting with ``#`` are ignored.  Errors carry the
    1-based line number.
    """
    header: tuple[int, int] | None = None
    tails: list[int] = []
    heads: list[int] = []
    iota: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if header is None:
                if parts[0] != "graph" or len(parts) != 3:
                    raise GraphError("expected 'graph <nV> <nDirE>'")
                header = (int(parts[1]), int(parts[2]))
            else:
                if parts[0] != "e" or len(parts) != 4:
                    raise GraphError("expected 'e <tail> <head> <iota>'")
                t, h, j = int(parts[1]), int(parts[2]), int(parts[3])
                if not (0 <= t < header[0] and 0 <= h < header[0]):
                    raise GraphError("endpoint out of range")
                if not 0 <= j < header[1]:
                    raise GraphError("involution image out of range")
                tails.append(t)
                heads.append(h)
                iota.append(j)
        except (GraphError, ValueError, IndexError) as exc:
            raise GraphError(f"line {lineno}: {exc}") from None
    if header is None:
        raise GraphError("missing 'graph' header")
    if len(tails) != header[1]:
        raise GraphError(f"header declares {header[1]} edges, found {len(tails)}")
    return Graph(header[0], tuple(tails), tuple(heads), tuple(iota))


def graph_hash(g: Graph) -> str:
    import hashlib

    return hashlib.sha256(to_text(g).encode()).hexdigest()[:16]
