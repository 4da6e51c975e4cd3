"""Expected numbers of ordered copies of a B-graph in random covers.

Every closed form here is a product of shifted falling factorials
``prod_i (n - offset - step*i) ** sign``; the same factor list gives both
the exact rational value at a given ``n`` and the power series in ``1/n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product
from typing import Iterable, Iterator, Sequence

import numpy as np

from .covers_models import (
    BGraph,
    ModelSpec,
    all_assignments,
    bgraph_from_fibres,
    check_compatible,
    count_embeddings_many,
    fibre_counts,
    is_etale,
    sample_batch,
)
from .graph_core import Graph, is_pruned, stats


@dataclass(frozen=True)
class Factor:
    offset: int
    step: int
    count: int
    sign: int  # +1 numerator, -1 denominator

    def value(self, n: int) -> Fraction:
        out = Fraction(1)
        for i in range(self.count):
            out *= n - self.offset - self.step * i
        return out if self.sign > 0 else 1 / out


@dataclass(frozen=True)
class ExpansionSeries:
    """``E(n) = n**leading_power * sum_i coeffs[i] * n**-i + O(n**(leading_power - r))``."""

    leading_power: int
    coeffs: tuple[Fraction, ...]

    @property
    def r(self) -> int:
        return len(self.coeffs)

    def evaluate(self, n: int) -> Fraction:
        total = sum((c / Fraction(n) ** i for i, c in enumerate(self.coeffs)), Fraction(0))
        return total * Fraction(n) ** self.leading_power


class NotOccurring(ValueError):
    """The B-graph has expected count identically zero in the model."""


def _partial_map(s: BGraph, e: int) -> dict[int, int]:
    """Tail-to-head map of S-edges lying over the base edge ``e``."""
    g = s.total
    return {g.tails[f]: g.heads[f] for f in range(g.num_dir_edges) if s.edge_map[f] == e}


def cyclic_cycle_lengths(s: BGraph, e: int) -> list[int]:
    mapping = _partial_map(s, e)
    lengths = []
    seen: set[int] = set()
    for start in mapping:
        if start in seen:
            continue
        path = []
        x = start
        while x in mapping and x not in seen and x not in path:
            path.append(x)
            x = mapping[x]
        if x == start:
            lengths.append(len(path))
        seen.update(path)
    return lengths


def cyclic_feasible(s: BGraph, e: int, n: int | None = None) -> bool:
    """Whether the partial injection over the whole-loop ``e`` extends to an n-cycle.

    Without ``n`` this asks for acyclicity.  With ``n`` a single cycle of
    length exactly ``n`` is also allowed.
    """
    lengths = cyclic_cycle_lengths(s, e)
    if not lengths:
        return True
    return n is not None and lengths == [n]


def _factors(s: BGraph, spec: ModelSpec, n: int | None) -> list[Factor] | None:
    """Factor list of the closed form, or None when the count is identically zero."""
    base = s.base
    if not is_etale(s):
        return None
    fc = fibre_counts(s)
    factors = [Factor(0, 1, b, +1) for b in fc.b if b]
    parity = spec.involution_parity
    g = s.total
    for e in base.orbit_representatives():
        if base.is_half_loop(e):
            if parity is None:
                raise ValueError(f"model {spec.kind} does not allow half-loops in the base")
            over = [f for f in g.orbit_representatives() if s.edge_map[f] == e]
            halves = sum(1 for f in over if g.is_half_loop(f))
            pairs = len(over) - halves
            if parity == "even":
                if halves:
                    return None
                factors.append(Factor(1, 2, pairs, -1))
            else:
                if halves > 1:
                    return None
                factors.append(Factor(0, 2, pairs + halves, -1))
            continue
        a = fc.a[e]
        if spec.is_cyclic and base.is_whole_loop(e):
            lengths = cyclic_cycle_lengths(s, e)
            if lengths:
                if n is None or lengths != [n]:
                    return None
                factors.append(Factor(1, 1, n - 1, -1))
            else:
                factors.append(Factor(1, 1, a, -1))
        else:
            factors.append(Factor(0, 1, a, -1))
    return factors


def expected_count(s: BGraph, n: int, spec: ModelSpec) -> Fraction:
    """Exact expected number of injective B-morphisms of ``s`` into a random cover."""
    check_compatible(s.base, n, spec)
    st = stats(s.total)
    if s.total.num_vertices > n or st.order + s.total.num_vertices > n:
        raise ValueError("need #V_S <= n and #E_S <= n")
    factors = _factors(s, spec, n)
    if factors is None:
        return Fraction(0)
    numer = [f for f in factors if f.sign > 0]
    value = Fraction(1)
    for f in numer:
        value *= f.value(n)
    if value == 0:
        return value
    for f in factors:
        if f.sign < 0:
            value *= f.value(n)
    return value


def _mul_trunc(a: list[Fraction], b: list[Fraction], r: int) -> list[Fraction]:
    out = [Fraction(0)] * r
    for i, x in enumerate(a[:r]):
        if x:
            for j, y in enumerate(b[: r - i]):
                out[i + j] += x * y
    return out


def expansion_series(s: BGraph, spec: ModelSpec, r: int) -> ExpansionSeries:
    """Power series of :func:`expected_count` in ``x = 1/n`` to ``r`` terms."""
    if r < 1:
        raise ValueError("truncation order must be positive")
    factors = _factors(s, spec, None)
    if factors is None:
        raise NotOccurring("B-graph does not occur in this model")
    lead = 0
    series = [Fraction(1)] + [Fraction(0)] * (r - 1)
    for f in factors:
        lead += f.sign * f.count
        for i in range(f.count):
            c = f.offset + f.step * i
            if f.sign > 0:
                term = [Fraction(1), Fraction(-c)] + [Fraction(0)] * (r - 2)
            else:
                term = [Fraction(c) ** m for m in range(r)]
            series = _mul_trunc(series, term[:r], r)
    return ExpansionSeries(lead, tuple(series))


# Monte Carlo and exhaustive checks


def _streaming_stats(counts: Iterable[np.ndarray]) -> tuple[float, float, int]:
    total = 0
    total_sq = 0
    size = 0
    for c in counts:
        c = np.asarray(c, dtype=np.int64)
        total += int(c.sum())
        total_sq += int((c * c).sum())
        size += len(c)
    if size == 0:
        raise ValueError("no trials")
    mean = Fraction(total, size)
    var = (Fraction(total_sq, size) - mean * mean) * Fraction(size, max(size - 1, 1))
    return float(mean), math.sqrt(float(var) / size), size


def monte_carlo_counts(
    shapes: Sequence[BGraph],
    n: int,
    spec: ModelSpec,
    trials: int,
    chunk: int = 20000,
) -> list[tuple[float, float]]:
    """Mean and standard error of embedding counts for several B-graphs over shared covers."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if not shapes:
        return []
    base = shapes[0].base
    sums = [[] for _ in shapes]
    done = 0
    stream = 0
    while done < trials:
        size = min(chunk, trials - done)
        sig = sample_batch(base, n, spec, size, stream=stream)
        for k, row in enumerate(count_embeddings_many(shapes, sig)):
            sums[k].append(row)
        done += size
        stream += 1
    return [_streaming_stats(c)[:2] for c in sums]


def monte_carlo_expected_count(
    s: BGraph, n: int, spec: ModelSpec, trials: int
) -> tuple[float, float]:
    return monte_carlo_counts([s], n, spec, trials)[0]


def exhaustive_average(shapes: Sequence[BGraph], n: int, spec: ModelSpec) -> list[Fraction]:
    """Average embedding count over every assignment of the model, as exact rationals."""
    if not shapes:
        return []
    sig = all_assignments(shapes[0].base, n, spec)
    return [Fraction(int(row.sum()), len(sig)) for row in count_embeddings_many(shapes, sig)]


# enumeration of small etale B-graphs


def _partial_injections(src: int, dst: int, budget: int) -> Iterator[list[tuple[int, int]]]:
    def rec(i: int, used: tuple[int, ...], acc: list[tuple[int, int]]):
        if i == src:
            yield list(acc)
            return
        yield from rec(i + 1, used, acc)
        if len(acc) < budget:
            for j in range(dst):
                if j not in used:
                    acc.append((i, j))
                    yield from rec(i + 1, used + (j,), acc)
                    acc.pop()

    yield from rec(0, (), [])


def _partial_involutions(size: int, budget: int) -> Iterator[list[tuple[int, int]]]:
    def rec(free: tuple[int, ...], acc: list[tuple[int, int]]):
        if not free:
            yield list(acc)
            return
        i, rest = free[0], free[1:]
        yield from rec(rest, acc)
        if len(acc) < budget:
            acc.append((i, i))
            yield from rec(rest, acc)
            acc.pop()
            for j in rest:
                acc.append((i, j))
                yield from rec(tuple(x for x in rest if x != j), acc)
                acc.pop()

    yield from rec(tuple(range(size)), [])


def _canonical(base: Graph, sizes: Sequence[int], maps: dict[int, list[tuple[int, int]]]) -> tuple:
    reps = base.orbit_representatives()
    best = None
    for perms in product(*(permutations(range(b)) for b in sizes)):
        key = []
        for e in reps:
            pt, ph = perms[base.tails[e]], perms[base.heads[e]]
            pairs = []
            for i, j in maps.get(e, ()):
                x, y = pt[i], ph[j]
                if base.is_half_loop(e) and x > y:
                    x, y = y, x
                pairs.append((x, y))
            key.append(tuple(sorted(pairs)))
        key = tuple(key)
        if best is None or key < best:
            best = key
    return tuple(sizes), best


def enumerate_etale(
    base: Graph,
    max_edges: int,
    pruned: bool = True,
    max_vertices: int | None = None,
    allow_half_loops: bool = True,
) -> list[BGraph]:
    """Pairwise non-isomorphic etale B-graphs with 1..max_edges edges.

    Sorted by (edges, vertices, canonical key) so that indices are stable.
    """
    max_vertices = max_edges if max_vertices is None else max_vertices
    reps = base.orbit_representatives()
    nvb = base.num_vertices
    found: dict[tuple, BGraph] = {}

    def sizes_iter(v: int, left: int) -> Iterator[tuple[int, ...]]:
        if v == nvb:
            yield ()
            return
        for b in range(left + 1):
            for rest in sizes_iter(v + 1, left - b):
                yield (b,) + rest

    for sizes in sizes_iter(0, max_vertices):
        if sum(sizes) == 0:
            continue
        offs = np.cumsum((0,) + sizes)
        nverts = int(offs[-1])

        def rec(k: int, maps: dict[int, list[tuple[int, int]]], deg: list[int], edges: int):
            if pruned:
                deficit = sum(max(0, 2 - d) for d in deg)
                if deficit > 2 * (max_edges - edges):
                    return
            if k == len(reps):
                if edges == 0 or (pruned and min(deg) < 2):
                    return
                key = _canonical(base, sizes, maps)
                if key not in found:
                    found[key] = bgraph_from_fibres(base, sizes, maps)
                return
            e = reps[k]
            tv, hv = base.tails[e], base.heads[e]
            left = max_edges - edges
            if base.is_half_loop(e):
                choices = _partial_involutions(sizes[tv], left)
            else:
                choices = _partial_injections(sizes[tv], sizes[hv], left)
            for pairs in choices:
                if not allow_half_loops and any(i == j for i, j in pairs) and base.is_half_loop(e):
                    continue
                nd = list(deg)
                for i, j in pairs:
                    x, y = int(offs[tv]) + i, int(offs[hv]) + j
                    if base.is_half_loop(e) and i == j:
                        nd[x] += 1
                    else:
                        nd[x] += 1
                        nd[y] += 1
                maps[e] = pairs
                rec(k + 1, maps, nd, edges + len(pairs))
                del maps[e]

        rec(0, {}, [0] * nverts, 0)

    def sort_key(item):
        key, s = item
        return (s.total.num_edges, s.total.num_vertices, key)

    out = [s for _, s in sorted(found.items(), key=sort_key)]
    if pruned:
        out = [s for s in out if is_pruned(s.total)]
    return out


def shape_label(s: BGraph) -> str:
    fc = fibre_counts(s)
    st = stats(s.total)
    a = ",".join(str(fc.a[e]) for e in s.base.orbit_representatives())
    return f"V{s.total.num_vertices}E{st.order + s.total.num_vertices}a[{a}]"
