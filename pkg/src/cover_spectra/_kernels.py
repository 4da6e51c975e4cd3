"""Compiled inner loops."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def count_embeddings_many_kernel(
    sigma, vptr, parent, parent_edge, base_vertex, check_ptr, check_tail, check_head, check_edge,
    root_word, word_ptr, word_edges,
):
    """Embedding counts of several plans into every cover of a batch.

    Plan ``s`` owns vertex slots ``vptr[s]:vptr[s+1]``; its ``check_ptr``
    slice starts at ``vptr[s] + s`` and indexes checks relative to the plan.
    A root slot with ``root_word >= 0`` only tries fixed points of that word.
    """
    trials = sigma.shape[0]
    n = sigma.shape[2]
    shapes = vptr.shape[0] - 1
    words = word_ptr.shape[0] - 1
    out = np.zeros((shapes, trials), dtype=np.int64)
    width = 1
    for s in range(shapes):
        width = max(width, vptr[s + 1] - vptr[s])
    cstart = np.zeros(shapes, dtype=np.int64)
    for s in range(1, shapes):
        cstart[s] = cstart[s - 1] + check_ptr[vptr[s] + s - 1]
    img = np.zeros(width, dtype=np.int64)
    nxt = np.zeros(width, dtype=np.int64)
    fixed = np.zeros((words, n), dtype=np.int64)
    nfixed = np.zeros(words, dtype=np.int64)
    for t in range(trials):
        for w in range(words):
            k = 0
            for i in range(n):
                j = i
                for q in range(word_ptr[w], word_ptr[w + 1]):
                    j = sigma[t, word_edges[q], j]
                if j == i:
                    fixed[w, k] = i
                    k += 1
            nfixed[w] = k
        for s in range(shapes):
            v0 = vptr[s]
            m = vptr[s + 1] - v0
            p0 = v0 + s
            c0 = cstart[s]
            count = 0
            level = 0
            nxt[0] = 0
            while level >= 0:
                if level == m:
                    count += 1
                    level -= 1
                    continue
                if parent[v0 + level] < 0:
                    k = nxt[level]
                    w = root_word[v0 + level]
                    if k >= (n if w < 0 else nfixed[w]):
                        level -= 1
                        continue
                    nxt[level] = k + 1
                    c = k if w < 0 else fixed[w, k]
                else:
                    if nxt[level] > 0:
                        level -= 1
                        continue
                    nxt[level] = 1
                    c = sigma[t, parent_edge[v0 + level], img[parent[v0 + level]]]
                ok = True
                bv = base_vertex[v0 + level]
                for u in range(level):
                    if img[u] == c and base_vertex[v0 + u] == bv:
                        ok = False
                        break
                if ok:
                    img[level] = c
                    for q in range(c0 + check_ptr[p0 + level], c0 + check_ptr[p0 + level + 1]):
                        if sigma[t, check_edge[q], img[check_tail[q]]] != img[check_head[q]]:
                            ok = False
                            break
                if ok:
                    level += 1
                    if level < m:
                        nxt[level] = 0
            out[s, t] = count
    return out


@njit(cache=True, nogil=True)
def walk_fixed_points(sigma, walks):
    """Per trial, sum over walks of fixed points of the composed permutations."""
    trials = sigma.shape[0]
    n = sigma.shape[2]
    k = walks.shape[1]
    out = np.zeros(trials, dtype=np.int64)
    for t in range(trials):
        total = 0
        for w in range(walks.shape[0]):
            for i in range(n):
                j = i
                for s in range(k):
                    j = sigma[t, walks[w, s], j]
                if j == i:
                    total += 1
        out[t] = total
    return out
