"""Reference solvers: exact iteration, random-walk sampling, and basic push.

All solvers score a single query node against every U-node, mixing structure
and attribute two-hops with weight ``beta`` and stopping each step with
probability ``alpha``.
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, TimeBudgetExceeded
from .graph import AttributedBipartiteGraph
from .transition import TransitionParams, propagate_step

logger = logging.getLogger(__name__)

# Fixed Monte Carlo batch width: keeps memory bounded while leaving the draw
# sequence, and therefore the output, a pure function of the seed.
_WALK_BATCH = 1 << 18


@dataclass(frozen=True)
class QueryParams:
    """Shared solver parameters.

    alpha: per-step stop probability, in (0, 1).
    beta: attribute-hop weight, in [0, 1].
    epsilon: additive per-entry error tolerance, in (0, 1].
    """

    alpha: float = 0.15
    beta: float = 0.35
    epsilon: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (0.0 <= self.beta <= 1.0):
            raise ParameterError(f"beta must lie in [0, 1], got {self.beta}")
        if not (0.0 < self.epsilon <= 1.0):
            raise ParameterError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    @property
    def transition(self) -> TransitionParams:
        return TransitionParams(beta=self.beta)


@dataclass
class ScoreVector:
    """Similarity scores of one query node against every U-node."""

    source: int
    scores: np.ndarray

    def top_k(self, k: int) -> list[tuple[int, float]]:
        """Top k entries, ties broken toward the smaller node index."""
        n = self.scores.size
        if not 1 <= k <= n:
            raise ParameterError(f"k must lie in [1, {n}], got {k}")
        order = np.lexsort((np.arange(n), -self.scores))[:k]
        return [(int(i), float(self.scores[i])) for i in order]


def validate_source(graph: AttributedBipartiteGraph, source: int) -> int:
    source = int(source)
    if not 0 <= source < graph.u_count:
        raise ParameterError(f"source index {source} out of range [0, {graph.u_count})")
    return source


# -- Monte Carlo ---------------------------------------------------------------


@dataclass(frozen=True)
class MCParams:
    """Walk-count control for the sampling solver.

    With ``walk_count`` unset, the count is chosen so that every entry is
    within epsilon of its expectation with probability 1 - failure_prob.
    """

    failure_prob: float = 1e-6
    walk_count: int | None = None

    def __post_init__(self):
        if not (0.0 < self.failure_prob < 1.0):
            raise ParameterError(f"failure_prob must lie in (0, 1), got {self.failure_prob}")
        if self.walk_count is not None and self.walk_count < 1:
            raise ParameterError(f"walk_count must be positive, got {self.walk_count}")


def default_walk_count(u_count: int, epsilon: float, failure_prob: float) -> int:
    """Concentration-bound walk count for additive error epsilon."""
    return math.ceil(2.0 * (1.0 + epsilon / 3.0) * math.log(u_count / failure_prob) / epsilon**2)


class AliasTable:
    """Constant-time weighted sampling over every row of one CSR relation.

    Holds a packed probability/alias pair per CSR entry; ``sample`` draws one
    neighbor for each row in a vectorized batch (two uniforms per draw).
    """

    def __init__(self, indptr: np.ndarray, indices: np.ndarray, weights: np.ndarray):
        self.indptr = indptr
        self.indices = indices
        n = indices.size
        self.prob = np.ones(n, dtype=np.float64)
        self.alias = np.zeros(n, dtype=np.int64)
        counts = np.diff(indptr)
        for row in np.flatnonzero(counts).tolist():
            s, e = indptr[row], indptr[row + 1]
            self._build_row(weights[s:e], self.prob[s:e], self.alias[s:e])

    @staticmethod
    def _build_row(w: np.ndarray, prob_out: np.ndarray, alias_out: np.ndarray) -> None:
        k = w.size
        scaled = w * (k / w.sum())
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        scaled = scaled.copy()
        while small and large:
            s, l = small.pop(), large.pop()
            prob_out[s] = scaled[s]
            alias_out[s] = l
            scaled[l] = (scaled[l] + scaled[s]) - 1.0
            (small if scaled[l] < 1.0 else large).append(l)
        for i in large:
            prob_out[i] = 1.0
        for i in small:
            prob_out[i] = 1.0

    def sample(self, rng: np.random.Generator, rows: np.ndarray) -> np.ndarray:
        """Draw one neighbor per row; every row must have at least one entry."""
        start = self.indptr[rows]
        deg = self.indptr[rows + 1] - start
        slot = np.minimum((rng.random(rows.size) * deg).astype(np.int64), deg - 1)
        pos = start + slot
        keep = rng.random(rows.size) < self.prob[pos]
        chosen = np.where(keep, slot, self.alias[pos])
        return self.indices[start + chosen]


def monte_carlo(
    graph: AttributedBipartiteGraph,
    params: QueryParams,
    source: int,
    *,
    mc: MCParams | None = None,
    seed: int = 0,
) -> ScoreVector:
    """Estimate scores by simulating stopping random walks from the source.

    Each walk stops at its current node with probability alpha per step and
    otherwise takes an attribute two-hop (probability beta) or a structure
    two-hop. A walk that lands on a node missing the sampled side dies
    without being counted, matching the absorption semantics of propagation.
    The result is the fraction of walks stopping at each node and is
    deterministic for a fixed seed.
    """
    source = validate_source(graph, source)
    mc = mc or MCParams()
    omega = mc.walk_count or default_walk_count(graph.u_count, params.epsilon, mc.failure_prob)
    logger.info("monte carlo: %d walks from %s", omega, graph.u_ids[source])
    rng = np.random.Generator(np.random.Philox(seed))
    alias_uv = graph.alias_table("uv")
    alias_vu = graph.alias_table("vu")
    alias_ua = graph.alias_table("ua") if graph.attr_count else None
    alias_au = graph.alias_table("au") if graph.attr_count else None

    stops = np.zeros(graph.u_count, dtype=np.int64)
    remaining = omega
    while remaining > 0:
        n = min(_WALK_BATCH, remaining)
        remaining -= n
        cur = np.full(n, source, dtype=np.int64)
        while cur.size:
            stop = rng.random(cur.size) < params.alpha
            stopped = cur[stop]
            if stopped.size:
                stops += np.bincount(stopped, minlength=graph.u_count)
            cur = cur[~stop]
            if not cur.size:
                break
            take_attr = rng.random(cur.size) < params.beta
            nxt = []
            walkers = cur[~take_attr]
            walkers = walkers[graph.uv_counts[walkers] > 0]  # dangling walks die
            if walkers.size:
                mid = alias_uv.sample(rng, walkers)
                nxt.append(alias_vu.sample(rng, mid))
            walkers = cur[take_attr]
            if alias_ua is not None:
                walkers = walkers[graph.ua_counts[walkers] > 0]
                if walkers.size:
                    mid = alias_ua.sample(rng, walkers)
                    nxt.append(alias_au.sample(rng, mid))
            cur = np.concatenate(nxt) if nxt else np.zeros(0, dtype=np.int64)
    return ScoreVector(source, stops / float(omega))


# -- exact iteration -------------------------------------------------------------


def power_iteration(
    graph: AttributedBipartiteGraph,
    params: QueryParams,
    source: int,
    *,
    iterations: int,
) -> ScoreVector:
    """Iterate ``pi <- (1 - alpha) * step(pi) + alpha * e_source``.

    After T iterations every entry is within (1 - alpha)^T of the limit.
    """
    source = validate_source(graph, source)
    if iterations < 1:
        raise ParameterError(f"iterations must be positive, got {iterations}")
    tp = params.transition
    pi = np.zeros(graph.u_count)
    pi[source] = 1.0
    for _ in range(iterations):
        pi = (1.0 - params.alpha) * propagate_step(graph, tp, pi)
        pi[source] += params.alpha
    return ScoreVector(source, pi)


def ground_truth_iterations(alpha: float, epsilon: float) -> int:
    """Iteration count giving truncation error at most epsilon / 100, floor 150."""
    needed = math.ceil(math.log(100.0 / epsilon) / math.log(1.0 / (1.0 - alpha)))
    return max(150, needed)


def ground_truth(
    graph: AttributedBipartiteGraph, params: QueryParams, source: int
) -> ScoreVector:
    """Near-exact scores via power iteration run two decades past epsilon."""
    return power_iteration(
        graph,
        params,
        source,
        iterations=ground_truth_iterations(params.alpha, params.epsilon),
    )


# -- one-shot local push ----------------------------------------------------------


def default_r_max(graph: AttributedBipartiteGraph, epsilon: float) -> float:
    """Residue threshold scale: epsilon over (edge count + attribute count)."""
    denom = graph.edge_count + graph.attr_count
    return epsilon / denom if denom else epsilon


def forward_push(
    graph: AttributedBipartiteGraph,
    params: QueryParams,
    source: int,
    *,
    r_max: float | None = None,
    max_seconds: float | None = None,
) -> ScoreVector:
    """Local push that scatters each node's residue over both two-hop fans.

    A FIFO queue holds nodes whose residue exceeds
    ``r_max * (|N(u)| + |A(u)|)``. Popping a node banks alpha of its residue
    and spreads the rest directly onto the U-endpoints two hops away, which
    revisits every fan edge on each pop. ``max_seconds`` aborts long runs
    with TimeBudgetExceeded; the clock is checked between pops.
    """
    source = validate_source(graph, source)
    if r_max is None:
        r_max = default_r_max(graph, params.epsilon)
    if r_max <= 0.0:
        raise ParameterError(f"r_max must be positive, got {r_max}")
    alpha, beta = params.alpha, params.beta
    thresh = r_max * (graph.uv_counts + graph.ua_counts)

    reserve = np.zeros(graph.u_count)
    residue = np.zeros(graph.u_count)
    residue[source] = 1.0
    queue: deque[int] = deque([source])
    queued = np.zeros(graph.u_count, dtype=bool)
    queued[source] = True
    started = time.perf_counter()
    pops = 0

    while queue:
        u = queue.popleft()
        queued[u] = False
        r_u = residue[u]
        if r_u <= thresh[u]:
            continue
        residue[u] = 0.0
        reserve[u] += alpha * r_u
        rho = (1.0 - alpha) * r_u

        touched = []
        if beta < 1.0:
            vs, wv = graph.u_neighbors(u)
            if vs.size:
                per_v = (1.0 - beta) * rho * wv / (graph.u_degree[u] * graph.v_degree[vs])
                flat = _row_positions(graph.vu_indptr, vs)
                targets = graph.vu_indices[flat]
                np.add.at(
                    residue, targets, np.repeat(per_v, graph.vu_counts[vs]) * graph.vu_weights[flat]
                )
                touched.append(targets)
        if beta > 0.0:
            ats, wa = graph.u_attributes(u)
            if ats.size:
                per_a = beta * rho * wa / (graph.u_attr_weight[u] * graph.attr_weight[ats])
                flat = _row_positions(graph.au_indptr, ats)
                targets = graph.au_indices[flat]
                np.add.at(
                    residue, targets, np.repeat(per_a, graph.au_counts[ats]) * graph.au_weights[flat]
                )
                touched.append(targets)

        if touched:
            cand = np.unique(np.concatenate(touched))
            ready = cand[(residue[cand] > thresh[cand]) & ~queued[cand]]
            queued[ready] = True
            queue.extend(ready.tolist())
        pops += 1
        if max_seconds is not None and pops % 64 == 0:
            elapsed = time.perf_counter() - started
            if elapsed > max_seconds:
                raise TimeBudgetExceeded(
                    f"push aborted after {pops} pops at {elapsed:.1f}s", elapsed
                )
    return ScoreVector(source, reserve)


def _row_positions(indptr: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Concatenated CSR entry positions for the given rows."""
    counts = indptr[rows + 1] - indptr[rows]
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(counts[:-1])))
    return np.repeat(indptr[rows] - offsets, counts) + np.arange(total, dtype=np.int64)
