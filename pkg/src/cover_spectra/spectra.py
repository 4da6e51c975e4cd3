"""Dense spectral routines and the Ihara determinant check."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .graph_core import Graph, adjacency_matrix, degree_matrix, hashimoto_matrix, stats


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralReport:
    full_adjacency_spectrum: tuple[float, ...]
    new_spectrum: tuple[float, ...]
    non_alon_count: int
    epsilon: float
    alon_bound: float

    def to_json(self) -> str:
        data = asdict(self)
        data["full_adjacency_spectrum"] = [float(x) for x in self.full_adjacency_spectrum]
        data["new_spectrum"] = sorted((float(x) for x in self.new_spectrum), reverse=True)
        return json.dumps(data, sort_keys=True)


@dataclass(frozen=True)
class IharaCheckResult:
    max_abs_residual: float
    sample_points: tuple[float, ...]


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def symmetric_eigen(
    m: np.ndarray, method: str = "jacobi", max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors (columns).

    ``method="jacobi"`` runs cyclic Jacobi rotations until the off-diagonal
    Frobenius norm drops below ``1e-11 * ||m||_F``.  ``method="lapack"``
    delegates to ``numpy.linalg.eigh`` for large Monte Carlo batches.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if not np.allclose(a, a.T, atol=1e-12 * scale, rtol=0.0):
        raise ValueError("matrix is not symmetric")
    if method == "lapack":
        w, v = np.linalg.eigh(a)
        return w[::-1].copy(), v[:, ::-1].copy()
    if method != "jacobi":
        raise ValueError(f"unknown method {method!r}")
    n = a.shape[0]
    v = np.eye(n)
    target = 1e-11 * np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = _off_norm(a)
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                g = 100.0 * abs(apq)
                app, aqq = a[p, p], a[q, q]
                if abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    a[p, q] = a[q, p] = 0.0
                    continue
                diff = aqq - app
                if abs(diff) + g == abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        off = _off_norm(a)
        if off > target:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(a).copy()
    idx = np.argsort(-w, kind="stable")
    return w[idx], v[:, idx]


def eigenvalues(m: np.ndarray, method: str = "jacobi") -> np.ndarray:
    return symmetric_eigen(m, method=method)[0]


def _strong_components(m: np.ndarray) -> list[np.ndarray]:
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    count, labels = connected_components(csr_matrix(m != 0), directed=True, connection="strong")
    return [np.flatnonzero(labels == c) for c in range(count)]


def perron_eigenvalue(
    m: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10**6,
    start: np.ndarray | None = None,
    return_vector: bool = False,
):
    """Spectral radius of a non-negative matrix by power iteration on ``m + I``.

    The matrix is split into strongly connected blocks; on each irreducible
    block ``m + I`` is primitive, so the iteration converges geometrically.
    Convergence is declared when the Collatz-Wielandt bracket
    ``min (Mx)_i/x_i <= rho <= max (Mx)_i/x_i`` is narrower than ``tol``
    (relative to ``1 + rho``).
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if (a < 0).any():
        raise ValueError("matrix must be non-negative")
    n = a.shape[0]
    best = 0.0
    best_vec = np.zeros(n)
    if n == 0 or not a.any():
        return (0.0, best_vec) if return_vector else 0.0
    for comp in _strong_components(a):
        sub = a[np.ix_(comp, comp)]
        if not sub.any():
            continue
        shifted = sub + np.eye(len(comp))
        x = np.ones(len(comp)) if start is None else np.asarray(start, float)[comp] + 1e-300
        x = x / x.sum()
        for _ in range(max_iter):
            y = shifted @ x
            ratios = y / x
            lo, hi = ratios.min(), ratios.max()
            x = y / y.sum()
            if hi - lo <= tol * hi:
                break
        else:
            raise ConvergenceError("power iteration did not converge")
        rho = 0.5 * (lo + hi) - 1.0
        if rho > best:
            best = rho
            best_vec = np.zeros(n)
            best_vec[comp] = x
    return (best, best_vec) if return_vector else best


def det_lu(m: np.ndarray) -> float | np.ndarray:
    """Determinant by LU factorization with partial pivoting.

    Accepts a single matrix or a stack of shape ``(..., N, N)``.
    """
    a = np.array(m, dtype=float)
    single = a.ndim == 2
    if single:
        a = a[None]
    stack_shape = a.shape[:-2]
    n = a.shape[-1]
    a = a.reshape(-1, n, n)
    b = a.shape[0]
    det = np.ones(b)
    scale = np.abs(a).max(axis=(1, 2)) if n else np.zeros(b)
    rows = np.arange(b)
    for k in range(n):
        piv = k + np.argmax(np.abs(a[:, k:, k]), axis=1)
        swap = piv != k
        if swap.any():
            r = rows[swap]
            tmp = a[r, k, :].copy()
            a[r, k, :] = a[r, piv[swap], :]
            a[r, piv[swap], :] = tmp
            det[swap] = -det[swap]
        p = a[:, k, k]
        # pivots at roundoff level are structural zeros
        singular = np.abs(p) <= 64.0 * np.finfo(float).eps * n * scale
        det = np.where(singular, 0.0, det * p)
        safe = np.where(p == 0.0, 1.0, p)
        if k + 1 < n:
            f = a[:, k + 1 :, k] / safe[:, None]
            a[:, k + 1 :, k:] -= f[:, :, None] * a[:, k, None, k:]
    det = det.reshape(stack_shape)
    return float(det.item()) if single else det


def default_sample_points(g: Graph) -> list[float]:
    count = 2 * g.num_dir_edges + 1
    return [float(x) for x in np.linspace(2.1, 3.1, count)]


def ihara_sides(g: Graph, points: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the Ihara determinant identity at each sample point."""
    mu = np.asarray(points, dtype=float)
    h = hashimoto_matrix(g)
    a = adjacency_matrix(g)
    dm = degree_matrix(g)
    s = stats(g)
    ne, nv = g.num_dir_edges, g.num_vertices
    lhs = det_lu(mu[:, None, None] * np.eye(ne) - h) if ne else np.ones(len(mu))
    vert = (
        det_lu(mu[:, None, None] ** 2 * np.eye(nv) - mu[:, None, None] * a + (dm - np.eye(nv)))
        if nv
        else np.ones(len(mu))
    )
    rhs = vert * (mu + 1.0) ** s.half_loop_count * (mu**2 - 1.0) ** (s.non_half_edge_count - nv)
    return np.asarray(lhs, float), np.asarray(rhs, float)


def ihara_check(g: Graph, sample_points: Sequence[float] | None = None) -> IharaCheckResult:
    points = default_sample_points(g) if sample_points is None else list(sample_points)
    if any(abs(abs(p) - 1.0) < 1e-12 for p in points):
        raise ValueError("sample points must avoid +1 and -1")
    lhs, rhs = ihara_sides(g, points)
    resid = np.abs(lhs - rhs) / (1.0 + np.abs(rhs))
    return IharaCheckResult(float(resid.max(initial=0.0)), tuple(points))


def hashimoto_spectrum_regular(
    adjacency_spectrum: Sequence[float], d: int, o1: int, o2: int, n: int, tol: float = 1e-7
) -> list[complex]:
    """Hashimoto eigenvalues of a d-regular graph from its adjacency spectrum.

    Each adjacency eigenvalue contributes the two roots of
    ``mu^2 - lam*mu + (d-1)``; the remaining ``+1``/``-1`` eigenvalues come from
    the exponents of ``(mu+1)`` and ``(mu^2-1)`` in the Ihara identity.  A
    negative ``(mu^2-1)`` exponent cancels roots already present.
    """
    if d < 3:
        raise ValueError("d must be at least 3")
    roots: list[complex] = []
    for lam in adjacency_spectrum:
        disc = complex(lam * lam - 4.0 * (d - 1))
        sq = disc**0.5
        roots += [(lam + sq) / 2.0, (lam - sq) / 2.0]
    roots += [-1.0 + 0j] * o1
    extra = o2 - n
    if extra >= 0:
        roots += [1.0 + 0j, -1.0 + 0j] * extra
    else:
        for target in [1.0, -1.0] * (-extra):
            i = min(range(len(roots)), key=lambda j: abs(roots[j] - target))
            if abs(roots[i] - target) > 1e-6:
                raise ValueError("Ihara exponent cancels a root that is not present")
            roots.pop(i)
    return [complex(round(z.real, 15), round(z.imag, 15)) for z in roots]


def new_spectrum(
    cover_spectrum: Sequence[float], base_spectrum: Sequence[float], tol: float = 1e-7
) -> list[float]:
    """Cover spectrum with one nearest match removed per base eigenvalue."""
    cover = np.sort(np.asarray(cover_spectrum, dtype=float))[::-1]
    if len(cover) < len(base_spectrum):
        raise ValueError("cover spectrum shorter than base spectrum")
    used = np.zeros(len(cover), dtype=bool)
    for lam in base_spectrum:
        dist = np.where(used, np.inf, np.abs(cover - lam))
        i = int(np.argmin(dist))
        if dist[i] > tol:
            raise ValueError(f"base eigenvalue {lam} has no cover eigenvalue within {tol}")
        used[i] = True
    return [float(x) for x in cover[~used]]


def new_spectrum_batch(cover_spectra: np.ndarray, base_spectrum: Sequence[float], tol: float = 1e-7) -> np.ndarray:
    """Row-wise :func:`new_spectrum` for a ``(trials, N)`` array."""
    out = np.array(cover_spectra, dtype=float)
    keep = np.ones(out.shape, dtype=bool)
    rows = np.arange(out.shape[0])
    for lam in base_spectrum:
        dist = np.where(keep, np.abs(out - lam), np.inf)
        i = np.argmin(dist, axis=1)
        if (dist[rows, i] > tol).any():
            raise ValueError(f"base eigenvalue {lam} has no cover eigenvalue within {tol}")
        keep[rows, i] = False
    return out[keep].reshape(out.shape[0], -1)


def alon_bound(d: int) -> float:
    return 2.0 * math.sqrt(d - 1)


def non_alon_count(new_spec: Sequence[float], d: int, epsilon: float) -> int:
    thr = alon_bound(d) + epsilon
    return int(sum(1 for lam in new_spec if abs(lam) > thr))


def spectral_report(
    cover_adjacency: np.ndarray,
    base_adjacency: np.ndarray,
    d: int,
    epsilon: float,
    method: str = "jacobi",
) -> SpectralReport:
    full = eigenvalues(cover_adjacency, method)
    base = eigenvalues(base_adjacency, method)
    new = new_spectrum(full, base)
    return SpectralReport(
        tuple(float(x) for x in full),
        tuple(new),
        non_alon_count(new, d, epsilon),
        float(epsilon),
        alon_bound(d),
    )
