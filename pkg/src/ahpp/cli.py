"""Command-line surface: single queries, benchmark sweeps, evaluation, generation.

Exit codes: 0 on success, 1 on I/O trouble or infeasible configuration, 2 on
domain errors such as an unknown node id or an out-of-range parameter. The
``AHPP_LOG`` environment variable (error, info, debug) controls diagnostics
on standard error; result data goes to standard output or ``--out``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass

from .baselines import MCParams, QueryParams, default_walk_count, ground_truth
from .errors import ParameterError, ParseError, StructureError
from .evaluation import (
    EvalReport,
    SOLVER_NAMES,
    benchmark_sweep,
    f1_at_k,
    link_prediction,
    load_clusters,
    make_solver,
    remove_edges,
    sample_queries,
    topk_precision,
    write_bench_csv,
)
from .graph import generate_synthetic, load_graph, save_graph
from .push import AsrpParams, estimate_lambda

logger = logging.getLogger(__name__)

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


@dataclass
class CliConfig:
    """Validated flag bundle; construction happens before any file is opened."""

    command: str
    edges: str | None = None
    attrs: str | None = None
    clusters: str | None = None
    algo: str = "asrp"
    algos: tuple[str, ...] = ()
    alpha: float = 0.15
    beta: float = 0.35
    epsilon: float = 1e-6
    epsilons: tuple[float, ...] = ()
    alphas: tuple[float, ...] = ()
    source: str | None = None
    k: int = 20
    seed: int = 0
    out: str | None = None
    plot: str | None = None
    T: int | None = None
    lambda_: float | None = None
    r_max: float | None = None
    p_f: float = 1e-6
    omega: int | None = None
    queries: int = 100
    workers: int = 1
    mode: str = "f1"
    remove_frac: float = 0.2
    fp_budget: float | None = None
    u_count: int = 0
    v_count: int = 0
    attr_count: int = 0
    edge_count: int = 0
    attr_edge_count: int = 0
    out_edges: str | None = None
    out_attrs: str | None = None

    def query_params(self) -> QueryParams:
        return QueryParams(alpha=self.alpha, beta=self.beta, epsilon=self.epsilon)


def _csv_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from None


def _csv_names(text: str) -> tuple[str, ...]:
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ahpp",
        description="Similarity search over attributed bipartite graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_graph_flags(p):
        p.add_argument("--edges", required=True, help="structure edge TSV")
        p.add_argument("--attrs", help="attribute edge TSV")

    def add_param_flags(p):
        p.add_argument("--alpha", type=float, default=0.15)
        p.add_argument("--beta", type=float, default=0.35)
        p.add_argument("--epsilon", type=float, default=1e-6)

    q = sub.add_parser("query", help="rank all nodes against one source node")
    add_graph_flags(q)
    add_param_flags(q)
    q.add_argument("--algo", choices=SOLVER_NAMES, default="asrp")
    q.add_argument("--source", required=True, help="query node id")
    q.add_argument("--k", type=int, default=20)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--T", type=int, help="iteration count / estimator depth override")
    q.add_argument("--lambda", dest="lambda_", type=float, help="error-scale override")
    q.add_argument("--r-max", dest="r_max", type=float, help="push threshold override")
    q.add_argument("--p-f", dest="p_f", type=float, default=1e-6)
    q.add_argument("--omega", type=int, help="walk-count override")
    q.add_argument("--out", help="write TSV here instead of stdout")

    b = sub.add_parser("bench", help="time solvers over a parameter grid")
    add_graph_flags(b)
    b.add_argument("--algos", type=_csv_names, default=("fp", "app", "asrp"))
    b.add_argument("--epsilons", type=_csv_floats, default=(1e-2, 1e-4, 1e-6))
    b.add_argument("--alphas", type=_csv_floats, default=(0.15,))
    b.add_argument("--beta", type=float, default=0.35)
    b.add_argument("--queries", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--omega", type=int, help="walk-count override for mc")
    b.add_argument("--fp-budget", dest="fp_budget", type=float, help="per-query seconds cap for fp")
    b.add_argument("--out", help="CSV path (default stdout)")
    b.add_argument("--plot", help="also render timing figure to this PNG path")

    e = sub.add_parser("eval", help="effectiveness protocols")
    add_graph_flags(e)
    add_param_flags(e)
    e.add_argument("--mode", choices=("f1", "topk", "linkpred"), default="f1")
    e.add_argument("--algo", choices=SOLVER_NAMES, default="asrp")
    e.add_argument("--clusters", help="cluster label TSV (f1 mode)")
    e.add_argument("--k", type=int, default=50)
    e.add_argument("--queries", type=int, default=100)
    e.add_argument("--remove-frac", dest="remove_frac", type=float, default=0.2)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--T", type=int, help="iteration override for pi")
    e.add_argument("--out", help="CSV path (default stdout)")
    e.add_argument("--plot", help="also render metric figure to this PNG path")

    g = sub.add_parser("gen", help="write a synthetic graph to TSV")
    g.add_argument("--u-count", dest="u_count", type=int, required=True)
    g.add_argument("--v-count", dest="v_count", type=int, required=True)
    g.add_argument("--attr-count", dest="attr_count", type=int, default=0)
    g.add_argument("--edge-count", dest="edge_count", type=int, required=True)
    g.add_argument("--attr-edge-count", dest="attr_edge_count", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-edges", dest="out_edges", required=True)
    g.add_argument("--out-attrs", dest="out_attrs")

    lam = sub.add_parser("lambda", help="print the error-scale estimate and its cost")
    add_graph_flags(lam)
    lam.add_argument("--alpha", type=float, default=0.15)
    lam.add_argument("--beta", type=float, default=0.35)
    lam.add_argument("--T", type=int, default=30)

    return parser


def _configure_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("AHPP_LOG", "error").lower(), logging.ERROR)
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )


def _write_lines(lines: list[str], out: str | None) -> None:
    text = "".join(f"{line}\n" for line in lines)
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def run_query(cfg: CliConfig) -> int:
    params = cfg.query_params()
    graph = load_graph(cfg.edges, cfg.attrs)
    source = graph.u_index(cfg.source)
    mc_params = MCParams(failure_prob=cfg.p_f, walk_count=cfg.omega)
    if cfg.algo == "mc" and cfg.omega is None:
        derived = default_walk_count(graph.u_count, params.epsilon, cfg.p_f)
        if derived > 10**9:
            logger.warning("derived walk count %d is very large; consider --omega", derived)
    asrp_params = AsrpParams(lambda_=cfg.lambda_, pi_estimation_T=cfg.T or 30)
    solver = make_solver(
        cfg.algo,
        params,
        seed=cfg.seed,
        mc_params=mc_params,
        iterations=cfg.T,
        r_max=cfg.r_max,
        asrp_params=asrp_params,
    )
    scores = solver(graph, source)
    k = min(cfg.k, graph.u_count)
    lines = [
        f"{rank}\t{graph.u_ids[node]}\t{score:.12e}"
        for rank, (node, score) in enumerate(scores.top_k(k), start=1)
    ]
    _write_lines(lines, cfg.out)
    return 0


def run_bench(cfg: CliConfig) -> int:
    for name in cfg.algos:
        if name not in SOLVER_NAMES:
            raise ParameterError(f"unknown solver {name!r}; expected one of {SOLVER_NAMES}")
    for eps in cfg.epsilons:
        for alpha in cfg.alphas:
            QueryParams(alpha=alpha, beta=cfg.beta, epsilon=eps)
    graph = load_graph(cfg.edges, cfg.attrs)
    rows = benchmark_sweep(
        graph,
        cfg.algos,
        cfg.epsilons,
        cfg.alphas,
        cfg.queries,
        cfg.seed,
        beta=cfg.beta,
        workers=cfg.workers,
        mc_walk_count=cfg.omega,
        fp_max_seconds=cfg.fp_budget,
    )
    if cfg.out is None:
        write_bench_csv(rows, sys.stdout)
    else:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            write_bench_csv(rows, fh)
    if cfg.plot:
        _plot_bench(rows, cfg.plot)
    return 0


def run_eval(cfg: CliConfig) -> int:
    params = cfg.query_params()
    graph = load_graph(cfg.edges, cfg.attrs)
    solver = make_solver(cfg.algo, params, seed=cfg.seed, iterations=cfg.T)

    if cfg.mode == "f1":
        truth = load_clusters(cfg.clusters, graph)
        labeled = sorted(truth.labels)
        if cfg.queries < len(labeled):
            import numpy as np

            rng = np.random.Generator(np.random.Philox(cfg.seed))
            queries = sorted(
                int(q) for q in rng.choice(labeled, size=cfg.queries, replace=False)
            )
        else:
            queries = labeled
        values, clocks, skipped = _run_metric_queries(
            queries,
            cfg.workers,
            lambda q: f1_at_k(solver(graph, q), truth, q),
        )
        report = EvalReport(
            metric="f1",
            params={"algo": cfg.algo, "epsilon": params.epsilon, "alpha": params.alpha},
            queries=[q for q, v in zip(queries, values) if v is not None],
            values=[v for v in values if v is not None],
            wall_clock_ns=[c for c, v in zip(clocks, values) if v is not None],
            skipped=skipped,
        )
        _emit_report(report, cfg)
        return 0

    if cfg.mode == "topk":
        queries = sample_queries(graph, cfg.queries, cfg.seed)
        exact = {q: ground_truth(graph, params, q) for q in queries}
        values, clocks, _ = _run_metric_queries(
            queries,
            cfg.workers,
            lambda q: topk_precision(solver(graph, q), exact[q], cfg.k),
        )
        report = EvalReport(
            metric=f"topk_precision@{cfg.k}",
            params={"algo": cfg.algo, "epsilon": params.epsilon, "alpha": params.alpha},
            queries=queries,
            values=values,
            wall_clock_ns=clocks,
        )
        _emit_report(report, cfg)
        return 0

    # linkpred
    held_out, removed = remove_edges(graph, cfg.remove_frac, cfg.seed)
    t0 = time.perf_counter_ns()
    precision = link_prediction(held_out, removed, solver, cfg.k)
    elapsed = time.perf_counter_ns() - t0
    lines = [
        "metric,k,remove_frac,seed,value,wall_clock_ns",
        f"linkpred_precision,{cfg.k},{cfg.remove_frac:g},{cfg.seed},{precision:.6f},{elapsed}",
    ]
    _write_lines(lines, cfg.out)
    if cfg.plot:
        _plot_values("linkpred_precision", [precision], cfg.plot)
    return 0


def _run_metric_queries(queries, workers, metric_fn):
    """Run one metric callable per query, timing each call."""

    def one(q):
        t0 = time.perf_counter_ns()
        value = metric_fn(q)
        return value, time.perf_counter_ns() - t0

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, queries))
    else:
        results = [one(q) for q in queries]
    values = [v for v, _ in results]
    clocks = [c for _, c in results]
    skipped = sum(1 for v in values if v is None)
    return values, clocks, skipped


def _emit_report(report: EvalReport, cfg: CliConfig) -> None:
    if cfg.out is None:
        report.write_csv(sys.stdout)
    else:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            report.write_csv(fh)
    logger.info("%s mean %.6f over %d queries", report.metric, report.mean, len(report.values))
    if cfg.plot:
        _plot_values(report.metric, report.values, cfg.plot)


def run_generate(cfg: CliConfig) -> int:
    graph = generate_synthetic(
        cfg.u_count, cfg.v_count, cfg.attr_count, cfg.edge_count, cfg.attr_edge_count, cfg.seed
    )
    save_graph(graph, cfg.out_edges, cfg.out_attrs)
    logger.info("wrote %r", graph)
    return 0


def run_lambda(cfg: CliConfig) -> int:
    params = QueryParams(alpha=cfg.alpha, beta=cfg.beta)
    graph = load_graph(cfg.edges, cfg.attrs)
    t0 = time.perf_counter_ns()
    lam = estimate_lambda(graph, params, cfg.T or 30)
    elapsed = (time.perf_counter_ns() - t0) / 1e9
    sys.stdout.write(f"lambda\t{lam:.12e}\npreprocess_s\t{elapsed:.6f}\n")
    return 0


def _plot_bench(rows, path: str) -> None:
    """Mean query time against epsilon, one line per (solver, alpha)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    series: dict[tuple[str, float], list[tuple[float, float]]] = {}
    for r in rows:
        series.setdefault((r.solver, r.alpha), []).append((r.epsilon, r.mean_s))
    for (solver, alpha), points in sorted(series.items()):
        points.sort()
        ax.plot(
            [p[0] for p in points],
            [p[1] for p in points],
            marker="o",
            label=f"{solver} (alpha={alpha:g})",
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("epsilon")
    ax.set_ylabel("mean query time (s)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_values(metric: str, values, path: str) -> None:
    """Histogram of per-query metric values."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=min(20, max(5, len(values) // 5 + 1)), range=(0.0, 1.0))
    ax.set_xlabel(metric)
    ax.set_ylabel("queries")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _config_from_args(args: argparse.Namespace) -> CliConfig:
    known = {f for f in CliConfig.__dataclass_fields__}
    fields = {k: v for k, v in vars(args).items() if k in known and v is not None}
    return CliConfig(**fields)


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _config_from_args(args)
    try:
        # Validate parameter ranges before touching any file.
        if cfg.command in ("query", "eval"):
            cfg.query_params()
        if cfg.command == "eval" and cfg.mode == "f1" and not cfg.clusters:
            sys.stderr.write("error: --clusters is required in f1 mode\n")
            return 1
        if cfg.command == "query":
            return run_query(cfg)
        if cfg.command == "bench":
            return run_bench(cfg)
        if cfg.command == "eval":
            return run_eval(cfg)
        if cfg.command == "gen":
            return run_generate(cfg)
        if cfg.command == "lambda":
            return run_lambda(cfg)
        raise ParameterError(f"unknown command {cfg.command!r}")
    except (ParseError, StructureError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except ParameterError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
