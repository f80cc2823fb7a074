"""Effectiveness and timing protocols: cluster F1, top-k precision, link prediction.

Metrics compare a solver's ranking against ground truth; the timing sweep
measures per-query wall-clock across a (solver, epsilon, alpha) grid and
emits CSV. All randomized protocols are seedable and deterministic.
"""

from __future__ import annotations

import csv
import logging
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .baselines import (
    MCParams,
    QueryParams,
    ScoreVector,
    forward_push,
    ground_truth,
    monte_carlo,
    power_iteration,
)
from .errors import ParameterError, ParseError, TimeBudgetExceeded, UnknownNodeError
from .graph import AttributedBipartiteGraph
from .push import AsrpParams, app, asrp, resolved_lambda

logger = logging.getLogger(__name__)

Solver = Callable[[AttributedBipartiteGraph, int], ScoreVector]

SOLVER_NAMES = ("mc", "pi", "fp", "app", "asrp")


def power_iterations_for(alpha: float, epsilon: float) -> int:
    """Iteration count whose geometric truncation error is at most epsilon."""
    return max(1, math.ceil(math.log(1.0 / epsilon) / math.log(1.0 / (1.0 - alpha))))


def make_solver(
    name: str,
    params: QueryParams,
    *,
    seed: int = 0,
    mc_params: MCParams | None = None,
    iterations: int | None = None,
    r_max: float | None = None,
    asrp_params: AsrpParams | None = None,
    fp_max_seconds: float | None = None,
) -> Solver:
    """Bind one solver name to a uniform ``(graph, source) -> ScoreVector`` callable."""
    if name == "mc":
        return lambda g, s: monte_carlo(g, params, s, mc=mc_params, seed=seed)
    if name == "pi":
        T = iterations or power_iterations_for(params.alpha, params.epsilon)
        return lambda g, s: power_iteration(g, params, s, iterations=T)
    if name == "fp":
        return lambda g, s: forward_push(g, params, s, r_max=r_max, max_seconds=fp_max_seconds)
    if name == "app":
        return lambda g, s: app(g, params, s, r_max=r_max)
    if name == "asrp":
        return lambda g, s: asrp(g, params, s, asrp_params=asrp_params)
    raise ParameterError(f"unknown solver {name!r}; expected one of {SOLVER_NAMES}")


# -- cluster ground truth ----------------------------------------------------------


@dataclass
class ClusterGroundTruth:
    """Cluster label per U-node index; unlabeled nodes are simply absent."""

    labels: dict[int, str]

    def __post_init__(self):
        if len(set(self.labels.values())) < 2:
            raise ParameterError("cluster ground truth needs at least 2 distinct clusters")

    def cluster_members(self, label: str) -> list[int]:
        return [u for u, c in self.labels.items() if c == label]

    def cluster_size(self, label: str) -> int:
        return sum(1 for c in self.labels.values() if c == label)


def load_clusters(path: str, graph: AttributedBipartiteGraph) -> ClusterGroundTruth:
    """Parse ``u_id<TAB>cluster_id`` lines; every node must exist in the graph."""
    labels: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 tab-separated fields, got {len(parts)}")
            node, cluster = parts
            if not node or not cluster:
                raise ParseError(f"{path}:{lineno}: empty field")
            try:
                idx = graph.u_index(node)
            except UnknownNodeError:
                raise UnknownNodeError(f"{path}:{lineno}: unknown U node id {node!r}") from None
            labels[idx] = cluster
    return ClusterGroundTruth(labels)


# -- metrics -----------------------------------------------------------------------


def f1_at_k(scores: ScoreVector, truth: ClusterGroundTruth, query: int) -> float | None:
    """F1 of the top-k retrieval with k fixed to the query's own cluster size.

    With that k, precision, recall, and F1 coincide. Returns None when the
    query carries no cluster label, so callers can skip it.
    """
    label = truth.labels.get(query)
    if label is None:
        return None
    members = set(truth.cluster_members(label))
    k = len(members)
    hits = sum(1 for node, _ in scores.top_k(k) if node in members)
    return hits / k


def topk_precision(approx: ScoreVector, exact: ScoreVector, k: int) -> float:
    """Fraction of the exact top-k set recovered by the approximate top-k set."""
    if approx.scores.size != exact.scores.size:
        raise ParameterError("score vectors cover different graphs")
    if approx.source != exact.source:
        raise ParameterError("score vectors answer different queries")
    exact_set = {node for node, _ in exact.top_k(k)}
    approx_set = {node for node, _ in approx.top_k(k)}
    return len(exact_set & approx_set) / k


def remove_edges(
    graph: AttributedBipartiteGraph, fraction: float, seed: int
) -> tuple[AttributedBipartiteGraph, list[tuple[int, int]]]:
    """Hold out a uniform sample of structure edges, keeping all node ids.

    Returns the reduced graph plus the removed (u, v) index pairs. Nodes
    isolated by the removal stay in the graph; the solvers treat them via
    absorption.
    """
    if not (0.0 <= fraction < 1.0):
        raise ParameterError(f"fraction must lie in [0, 1), got {fraction}")
    n_edges = graph.edge_count
    count = int(round(fraction * n_edges))
    rng = np.random.Generator(np.random.Philox(seed))
    chosen = np.sort(rng.choice(n_edges, size=count, replace=False))
    keep = np.ones(n_edges, dtype=bool)
    keep[chosen] = False
    held_out = AttributedBipartiteGraph(
        graph.u_ids,
        graph.v_ids,
        graph.attr_ids,
        (graph.uv_rows[keep], graph.uv_indices[keep], graph.uv_weights[keep]),
        (graph.ua_rows, graph.ua_indices, graph.ua_weights),
    )
    removed = [
        (int(u), int(v)) for u, v in zip(graph.uv_rows[chosen], graph.uv_indices[chosen])
    ]
    return held_out, removed


def link_prediction(
    g_held_out: AttributedBipartiteGraph,
    removed_edges: Sequence[tuple[int, int]],
    solver: Solver,
    k: int,
) -> float:
    """Fraction of held-out edges recovered by neighbors-of-similar-nodes candidates.

    For each U-endpoint of a removed edge, the solver ranks the k most
    similar U-nodes on the reduced graph (the endpoint itself excluded);
    every (endpoint, neighbor-of-similar-node) pair becomes a candidate.
    Candidates are deduplicated and pairs already present in the reduced
    graph are excluded. Returns |candidates ∩ removed| / |removed|.
    """
    if k < 0:
        raise ParameterError(f"k must be non-negative, got {k}")
    if not removed_edges:
        return 0.0
    if k == 0:
        return 0.0
    k = min(k, g_held_out.u_count)
    removed = set(removed_edges)
    candidates: set[tuple[int, int]] = set()
    for u in sorted({u for u, _ in removed}):
        existing = set(g_held_out.u_neighbors(u)[0].tolist())
        ranked = solver(g_held_out, u).top_k(min(k + 1, g_held_out.u_count))
        similars = [node for node, _ in ranked if node != u][:k]
        for similar in similars:
            for v in g_held_out.u_neighbors(similar)[0].tolist():
                if v not in existing:
                    candidates.add((u, int(v)))
    return len(candidates & removed) / len(removed)


# -- reports and timing sweeps -------------------------------------------------------


@dataclass
class EvalReport:
    """Per-query metric values for one protocol run, with timing."""

    metric: str
    params: dict
    queries: list[int]
    values: list[float]
    wall_clock_ns: list[int]
    skipped: int = 0

    def __post_init__(self):
        for v in self.values:
            if not (0.0 <= v <= 1.0):
                raise ParameterError(f"metric value {v} outside [0, 1]")

    @property
    def mean(self) -> float:
        return statistics.fmean(self.values) if self.values else float("nan")

    def write_csv(self, stream) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["metric", "query", "value", "wall_clock_ns"])
        for q, v, ns in zip(self.queries, self.values, self.wall_clock_ns):
            writer.writerow([self.metric, q, f"{v:.6f}", ns])
        writer.writerow([self.metric, "mean", f"{self.mean:.6f}", sum(self.wall_clock_ns)])


@dataclass
class BenchRow:
    """Aggregate timing for one (solver, epsilon, alpha) cell."""

    solver: str
    epsilon: float
    alpha: float
    queries: int
    mean_s: float
    median_s: float
    p95_s: float
    preprocess_s: float = 0.0
    timeouts: int = 0


BENCH_CSV_FIELDS = (
    "solver",
    "epsilon",
    "alpha",
    "queries",
    "mean_s",
    "median_s",
    "p95_s",
    "preprocess_s",
    "timeouts",
)


def write_bench_csv(rows: Iterable[BenchRow], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(BENCH_CSV_FIELDS)
    for r in rows:
        writer.writerow(
            [
                r.solver,
                f"{r.epsilon:g}",
                f"{r.alpha:g}",
                r.queries,
                f"{r.mean_s:.6f}",
                f"{r.median_s:.6f}",
                f"{r.p95_s:.6f}",
                f"{r.preprocess_s:.6f}",
                r.timeouts,
            ]
        )


def _percentile(values: list[float], q: float) -> float:
    return float(np.percentile(np.asarray(values), q))


def sample_queries(graph: AttributedBipartiteGraph, count: int, seed: int) -> list[int]:
    """Uniform query sample without replacement, capped at |U| with a warning."""
    if count < 1:
        raise ParameterError(f"query count must be positive, got {count}")
    if count > graph.u_count:
        logger.warning("requested %d queries but |U|=%d; capping", count, graph.u_count)
        count = graph.u_count
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.choice(graph.u_count, size=count, replace=False).tolist()


def benchmark_sweep(
    graph: AttributedBipartiteGraph,
    solver_names: Sequence[str],
    epsilons: Sequence[float],
    alphas: Sequence[float],
    queries: int | Sequence[int],
    seed: int,
    *,
    beta: float = 0.35,
    workers: int = 1,
    mc_walk_count: int | None = None,
    fp_max_seconds: float | None = None,
) -> list[BenchRow]:
    """Time every solver over an (epsilon, alpha) grid on a shared query sample.

    Each cell runs one untimed warm-up query, then times every sampled query
    with the monotonic nanosecond clock. For the self-regulating solver the
    error-scale estimation is timed separately and reported as preprocessing.
    A one-shot-push query that exceeds ``fp_max_seconds`` is recorded at its
    elapsed time (a lower bound) and counted in ``timeouts``. Row order and
    all non-timing fields are deterministic for a fixed seed.
    """
    for name in solver_names:
        if name not in SOLVER_NAMES:
            raise ParameterError(f"unknown solver {name!r}; expected one of {SOLVER_NAMES}")
    if isinstance(queries, int):
        query_list = sample_queries(graph, queries, seed)
    else:
        query_list = [int(q) for q in queries]
    if not query_list:
        raise ParameterError("benchmark needs at least one query")

    rows: list[BenchRow] = []
    for name in solver_names:
        for eps in epsilons:
            for alpha in alphas:
                params = QueryParams(alpha=alpha, beta=beta, epsilon=eps)
                preprocess_s = 0.0
                if name == "asrp":
                    t0 = time.perf_counter_ns()
                    resolved_lambda(graph, params, AsrpParams())
                    preprocess_s = (time.perf_counter_ns() - t0) / 1e9
                mc_params = MCParams(walk_count=mc_walk_count) if name == "mc" else None
                solver = make_solver(
                    name,
                    params,
                    seed=seed,
                    mc_params=mc_params,
                    fp_max_seconds=fp_max_seconds,
                )

                def timed(q: int) -> tuple[float, bool]:
                    t0 = time.perf_counter_ns()
                    try:
                        solver(graph, q)
                    except TimeBudgetExceeded as exc:
                        return exc.elapsed, True
                    return (time.perf_counter_ns() - t0) / 1e9, False

                timed(query_list[0])  # warm-up, excluded from the stats
                if workers > 1:
                    with ThreadPoolExecutor(max_workers=workers) as pool:
                        outcomes = list(pool.map(timed, query_list))
                else:
                    outcomes = [timed(q) for q in query_list]
                elapsed = [t for t, _ in outcomes]
                rows.append(
                    BenchRow(
                        solver=name,
                        epsilon=eps,
                        alpha=alpha,
                        queries=len(query_list),
                        mean_s=statistics.fmean(elapsed),
                        median_s=statistics.median(elapsed),
                        p95_s=_percentile(elapsed, 95.0),
                        preprocess_s=preprocess_s,
                        timeouts=sum(1 for _, hit in outcomes if hit),
                    )
                )
                logger.info(
                    "bench %s eps=%g alpha=%g: mean %.4fs over %d queries",
                    name,
                    eps,
                    alpha,
                    rows[-1].mean_s,
                    len(query_list),
                )
    return rows
