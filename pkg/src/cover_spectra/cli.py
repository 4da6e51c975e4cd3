"""Command-line front end.

Every table goes to stdout or ``--out``; with ``--out`` a JSON sidecar
``<out>.json`` records the full configuration.  Exit codes: 0 success,
2 validation error, 3 budget exhaustion.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .covers_models import (
    MODEL_KINDS,
    CoordCover,
    ModelError,
    ModelSpec,
    check_compatible,
    cover_adjacency,
    sample,
)
from .graph_core import Graph, GraphError, adjacency_matrix, from_text, random_graph
from .spectra import ihara_check, spectral_report
from .walks import BudgetExceeded

EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 2, 3
THREADS_ENV = "COVER_SPECTRA_THREADS"


class ValidationError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    subcommand: str
    params: dict[str, Any] = field(default_factory=dict)

    def sidecar(self) -> str:
        return json.dumps(
            {"subcommand": self.subcommand, "version": __version__, "config": self.params},
            sort_keys=True,
            indent=2,
        ) + "\n"


# argument helpers


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _read_graph(path: str) -> Graph:
    try:
        with open(path, encoding="utf-8") as fh:
            return from_text(fh.read())
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    except GraphError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _read_lengths(path: str, g: Graph) -> list[int]:
    """Lengths TSV: ``<dir-edge-id>\\t<length>`` lines; the value applies to the whole orbit."""
    lengths = [1] * g.num_dir_edges
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        try:
            e, k = int(parts[0]), int(parts[1])
            if not 0 <= e < g.num_dir_edges or k < 1:
                raise ValueError
        except (ValueError, IndexError):
            raise ValidationError(f"{path}: line {lineno}: expected '<edge>\\t<positive length>'") from None
        lengths[e] = lengths[g.iota[e]] = k
    return lengths


def resolve_threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            v = int(env)
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be a positive integer") from None
        if v < 1:
            raise ValidationError(f"{THREADS_ENV} must be a positive integer")
        return v
    return os.cpu_count() or 1


def _map(threads: int, fn: Callable, items: Sequence) -> list:
    """Ordered map; each item draws from its own RNG streams so order of execution is irrelevant."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _tsv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    def fmt(x: Any) -> str:
        if isinstance(x, (float, np.floating)):
            return repr(float(x))
        return str(x)

    lines = ["#" + "\t".join(header)]
    lines += ["\t".join(fmt(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def _spec(args) -> ModelSpec:
    try:
        return ModelSpec(args.model, args.seed)
    except ModelError as exc:
        raise ValidationError(str(exc)) from None


# subcommands


def cmd_generate(args) -> tuple[str, dict]:
    base = _read_graph(args.base)
    spec = _spec(args)
    check_compatible(base, args.n, spec)
    blocks = [sample(base, args.n, spec, trial=t).to_text() for t in range(args.trials)]
    return "\n".join(blocks), {"base": args.base, "model": args.model, "n": args.n, "trials": args.trials, "seed": args.seed}


def cmd_spectrum(args) -> tuple[str, dict]:
    base = _read_graph(args.base)
    d = base.is_regular()
    if d is None:
        raise ValidationError("spectrum needs a regular base graph")
    if args.cover:
        with open(args.cover, encoding="utf-8") as fh:
            cover = CoordCover.from_text(base, fh.read())
    else:
        spec = _spec(args)
        check_compatible(base, args.n, spec)
        cover = sample(base, args.n, spec, trial=args.trial)
    method = "lapack" if cover.n * base.num_vertices > 64 else "jacobi"
    report = spectral_report(cover_adjacency(cover), adjacency_matrix(base), d, args.eps, method)
    return report.to_json() + "\n", {
        "base": args.base, "model": args.model, "n": cover.n, "seed": args.seed,
        "trial": args.trial, "eps": args.eps, "cover": args.cover,
    }


def cmd_nonalon(args) -> tuple[str, dict]:
    from .trace_lab import loglog_slope, nonalon_probability_scan

    base = _read_graph(args.base)
    if base.is_regular() != args.d:
        raise ValidationError(f"base graph is not {args.d}-regular")
    spec = _spec(args)
    for n in args.n:
        check_compatible(base, n, spec)
    scans = _map(
        args.threads, lambda n: nonalon_probability_scan(base, spec, args.eps, [n], args.trials), args.n
    )
    rows = [s.rows[0] for s in scans]
    slope, slope_se = loglog_slope(rows)
    text = _tsv(["n", "p_hat", "stderr"], rows)
    meta = {
        "base": args.base, "model": args.model, "d": args.d, "eps": args.eps,
        "n": args.n, "trials": args.trials, "seed": args.seed,
        "slope": slope, "slope_stderr": slope_se,
    }
    return text, meta


def cmd_tangles(args) -> tuple[str, dict]:
    from .tangles_trees import has_tangles

    g = _read_graph(args.graph)
    if args.nu <= 1:
        raise ValidationError("--nu must exceed 1")
    rep = has_tangles(g, args.nu, args.r, args.edge_budget)
    row = [
        int(rep.found),
        rep.witness_mu1 if rep.witness_mu1 is not None else "",
        rep.witness_order if rep.witness_order is not None else "",
        int(rep.search_budget_exhausted),
    ]
    text = _tsv(["found", "witness_mu1", "witness_order", "budget_exhausted"], [row])
    meta = {"graph": args.graph, "nu": args.nu, "r": args.r, "edge_budget": args.edge_budget}
    if rep.search_budget_exhausted and not rep.found:
        raise _Budget(text, meta)
    return text, meta


class _Budget(Exception):
    def __init__(self, text: str, meta: dict):
        super().__init__("search budget exhausted")
        self.text, self.meta = text, meta


def cmd_trace_scan(args) -> tuple[str, dict]:
    from .trace_lab import fit_coefficients, trace_scan, TraceScanResult

    base = _read_graph(args.base)
    spec = _spec(args)
    for n in args.n:
        check_compatible(base, n, spec)
    filt = (args.nu, args.r, args.edge_budget) if args.nu is not None else None
    parts = _map(
        args.threads, lambda n: trace_scan(base, spec, args.k, [n], args.trials, filt), args.n
    )
    cells = {}
    for p in parts:
        cells.update(p.cells)
    scan = TraceScanResult(cells, args.trials, args.seed, args.model, filt)
    rows = [
        [k, n, c.mean, c.stderr, c.trials, int(c.flagged)]
        for (k, n), c in sorted(cells.items())
    ]
    text = _tsv(["k", "n", "mean", "stderr", "trials", "flagged"], rows)
    meta = {
        "base": args.base, "model": args.model, "k": args.k, "n": args.n,
        "trials": args.trials, "seed": args.seed, "tangle_filter": filt,
    }
    if args.fit_r:
        fits = {}
        for k in args.k:
            f = fit_coefficients(scan, k, args.fit_r)
            fits[str(k)] = asdict(f)
            for i, c in enumerate(f.coeffs):
                text += f"#fit\tk={k}\tc{i}={c!r}\tci=[{f.ci_low[i]!r},{f.ci_high[i]!r}]\n"
        meta["fits"] = fits
    if any(c.flagged for c in cells.values()):
        raise _Budget(text, meta)
    return text, meta


def cmd_expect(args) -> tuple[str, dict]:
    from .expectations import enumerate_etale, expected_count, monte_carlo_counts, shape_label

    base = _read_graph(args.base)
    spec = _spec(args)
    for n in args.n:
        check_compatible(base, n, spec)
    shapes = enumerate_etale(base, args.max_edges)

    def one(n):
        ok = [s for s in shapes if s.total.num_vertices <= n and s.total.num_edges <= n]
        stats_ = monte_carlo_counts(ok, n, spec, args.trials)
        out = []
        for s, (mean, err) in zip(ok, stats_):
            exact = expected_count(s, n, spec)
            z = (mean - float(exact)) / err if err > 0 else (0.0 if mean == exact else float("inf"))
            out.append([args.model, n, f"{shapes.index(s)}:{shape_label(s)}", str(exact), mean, err, z])
        return out

    rows = [r for block in _map(args.threads, one, args.n) for r in block]
    text = _tsv(["model", "n", "S-id", "closed_form", "mc_mean", "mc_stderr", "z_score"], rows)
    return text, {
        "base": args.base, "model": args.model, "n": args.n, "trials": args.trials,
        "seed": args.seed, "max_edges": args.max_edges,
    }


def cmd_shannon(args) -> tuple[str, dict]:
    from .tangles_trees import shannon_valence

    g = _read_graph(args.graph)
    lengths = _read_lengths(args.lengths, g) if args.lengths else None
    res = shannon_valence(g, lengths, walks=args.walks)
    text = _tsv(["valence", "z0", "residual"], [[res.valence, res.z0, float(res.bisection_residual)]])
    return text, {"graph": args.graph, "lengths": args.lengths, "walks": args.walks}


def cmd_bounds(args) -> tuple[str, dict]:
    from .trace_lab import markov_bounds, r_default

    ds = range(args.d, (args.d_max or args.d) + 1)
    lines = [
        "| d | r | hashimoto | adjacency (balanced) | adjacency (as written) |",
        "|---|---|---|---|---|",
    ]
    for d in ds:
        r = args.r or r_default(d)
        b = markov_bounds(d, r)
        lines.append(
            f"| {d} | {r} | {b['hashimoto_bound']:.4f} | {b['adjacency_bound_balanced']:.4f} "
            f"| {b['adjacency_bound_as_written']:.4f} |"
        )
    return "\n".join(lines) + "\n", {"d": args.d, "d_max": args.d_max, "r": args.r}


def cmd_ihara_check(args) -> tuple[str, dict]:
    graphs: list[tuple[str, Graph]] = []
    if args.graph:
        graphs.append((args.graph, _read_graph(args.graph)))
    if args.random:
        rng = np.random.default_rng(args.seed)
        for i in range(args.random):
            graphs.append((f"random-{i}", random_graph(rng, args.max_v, max_extra_edges=2 * args.max_v)))
    if not graphs:
        raise ValidationError("give --graph or --random")
    rows = []
    for name, g in graphs:
        res = ihara_check(g)
        rows.append([name, g.num_vertices, g.num_dir_edges, res.max_abs_residual])
    text = _tsv(["graph", "vertices", "dir_edges", "max_scaled_residual"], rows)
    return text, {"graph": args.graph, "random": args.random, "max_v": args.max_v, "seed": args.seed}


# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cover-spectra", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, model=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=_positive, default=None)
        sp.add_argument("--out", default=None, help="output path; a JSON sidecar is written next to it")
        if model:
            sp.add_argument("--model", choices=MODEL_KINDS, default="permutation")

    sp = sub.add_parser("generate", help="sample covers")
    sp.add_argument("--base", required=True)
    sp.add_argument("--n", type=_positive, required=True)
    sp.add_argument("--trials", type=_positive, default=1)
    common(sp)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("spectrum", help="spectral report of one cover")
    sp.add_argument("--base", required=True)
    sp.add_argument("--n", type=_positive, default=1)
    sp.add_argument("--trial", type=int, default=0)
    sp.add_argument("--eps", type=float, default=0.0)
    sp.add_argument("--cover", default=None, help="read a cover file instead of sampling")
    common(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("nonalon", help="probability of non-Alon new eigenvalues")
    sp.add_argument("--base", required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--n", type=_int_list, required=True)
    sp.add_argument("--trials", type=_positive, required=True)
    common(sp)
    sp.set_defaults(func=cmd_nonalon)

    sp = sub.add_parser("tangles", help="search a graph for tangles")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--nu", type=float, required=True)
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--edge-budget", type=_positive, default=12)
    common(sp, model=False)
    sp.set_defaults(func=cmd_tangles)

    sp = sub.add_parser("trace-scan", help="Monte Carlo Hashimoto trace scan")
    sp.add_argument("--base", required=True)
    sp.add_argument("--k", type=_int_list, required=True)
    sp.add_argument("--n", type=_int_list, required=True)
    sp.add_argument("--trials", type=_positive, required=True)
    sp.add_argument("--fit-r", type=int, default=0)
    sp.add_argument("--nu", type=float, default=None, help="enable the tangle filter")
    sp.add_argument("--r", type=int, default=2)
    sp.add_argument("--edge-budget", type=_positive, default=10)
    common(sp)
    sp.set_defaults(func=cmd_trace_scan)

    sp = sub.add_parser("expect", help="closed-form versus Monte Carlo expected counts")
    sp.add_argument("--base", required=True)
    sp.add_argument("--n", type=_int_list, required=True)
    sp.add_argument("--trials", type=_positive, required=True)
    sp.add_argument("--max-edges", type=_positive, default=3)
    common(sp)
    sp.set_defaults(func=cmd_expect)

    sp = sub.add_parser("shannon", help="Shannon valence of a variable-length graph")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--lengths", default=None)
    sp.add_argument("--walks", choices=("directed", "graph"), default="directed")
    common(sp, model=False)
    sp.set_defaults(func=cmd_shannon)

    sp = sub.add_parser("bounds", help="Markov trace bound table")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--d-max", type=int, default=None)
    sp.add_argument("--r", type=int, default=None)
    common(sp, model=False)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("ihara-check", help="verify the Ihara determinant identity")
    sp.add_argument("--graph", default=None)
    sp.add_argument("--random", type=int, default=0)
    sp.add_argument("--max-v", type=_positive, default=10)
    common(sp, model=False)
    sp.set_defaults(func=cmd_ihara_check)
    return p


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "threads")}


def _emit(args, text: str, meta: dict) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        cfg = ExperimentConfig(args.subcommand, {**_params(args), **meta})
        with open(args.out + ".json", "w", encoding="utf-8") as fh:
            fh.write(cfg.sidecar())
    else:
        sys.stdout.write(text)


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        args.threads = resolve_threads(args.threads)
        if getattr(args, "d", None) is not None and args.subcommand in ("bounds", "nonalon") and args.d < 3:
            raise ValidationError("--d must be at least 3")
        text, meta = args.func(args)
    except _Budget as exc:
        _emit(args, exc.text, exc.meta)
        print("error: search budget exhausted", file=sys.stderr)
        return EXIT_BUDGET
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValidationError, GraphError, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RuntimeError as exc:
        if type(exc).__name__ == "RejectionBudgetExhausted":
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_BUDGET
        raise
    _emit(args, text, meta)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
