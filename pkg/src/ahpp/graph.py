"""Attributed bipartite graph: immutable CSR storage, TSV I/O, synthetic generation.

A graph has three node partitions: query-side nodes U, opposite-side nodes V,
and attributes. Weighted edges run U-V (structure) and U-attribute. Both edge
sets are stored in compressed sparse rows in both directions, so neighbor
slices are O(degree) views and transposed access needs no per-query work.
"""

from __future__ import annotations

import enum
import logging
import threading
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError, ParseError, StructureError, UnknownNodeError

logger = logging.getLogger(__name__)


class Partition(enum.Enum):
    """Which of the three node spaces an index lives in."""

    U = "u"
    V = "v"
    ATTR = "attr"


@dataclass(frozen=True)
class NodeRef:
    """A node addressed by partition plus dense index within that partition."""

    partition: Partition
    index: int


def _as_index_array(values: Iterable[int]) -> np.ndarray:
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values)
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    return arr.astype(np.int64, copy=False)


def _merge_coo(
    rows: np.ndarray, cols: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sort by (row, col) and sum weights of duplicate pairs."""
    if rows.size == 0:
        return rows, cols, weights.astype(np.float64, copy=False)
    order = np.lexsort((cols, rows))
    rows, cols, weights = rows[order], cols[order], weights[order].astype(np.float64)
    boundary = np.empty(rows.size, dtype=bool)
    boundary[0] = True
    boundary[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    starts = np.flatnonzero(boundary)
    merged_w = np.add.reduceat(weights, starts)
    return rows[starts], cols[starts], merged_w


def _csr(
    rows: np.ndarray, cols: np.ndarray, weights: np.ndarray, n_rows: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Build (indptr, indices, weights) from merged, row-sorted COO arrays."""
    counts = np.bincount(rows, minlength=n_rows) if rows.size else np.zeros(n_rows, dtype=np.int64)
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, cols.copy(), weights.copy()


class AttributedBipartiteGraph:
    """Immutable attributed bipartite graph over dense integer indices.

    Construction merges duplicate edges by summing their weights and
    precomputes weighted degrees on every side. Original string ids are kept
    for I/O; all computation uses dense indices.
    """

    def __init__(
        self,
        u_ids: Sequence[str],
        v_ids: Sequence[str],
        attr_ids: Sequence[str],
        edges: tuple[Iterable[int], Iterable[int], Iterable[float]],
        attr_edges: tuple[Iterable[int], Iterable[int], Iterable[float]],
    ):
        self.u_ids = tuple(u_ids)
        self.v_ids = tuple(v_ids)
        self.attr_ids = tuple(attr_ids)
        self.u_count = len(self.u_ids)
        self.v_count = len(self.v_ids)
        self.attr_count = len(self.attr_ids)
        if self.u_count == 0:
            raise StructureError("graph has no query-side (U) nodes")
        for name, ids in (("u", self.u_ids), ("v", self.v_ids), ("attr", self.attr_ids)):
            if len(set(ids)) != len(ids):
                raise StructureError(f"duplicate {name} ids")

        eu, ev = _as_index_array(edges[0]), _as_index_array(edges[1])
        ew = np.asarray(list(edges[2]) if not isinstance(edges[2], np.ndarray) else edges[2], dtype=np.float64)
        au, aa = _as_index_array(attr_edges[0]), _as_index_array(attr_edges[1])
        aw = np.asarray(list(attr_edges[2]) if not isinstance(attr_edges[2], np.ndarray) else attr_edges[2], dtype=np.float64)
        if not (eu.size == ev.size == ew.size):
            raise ParameterError("edge arrays must share one length")
        if not (au.size == aa.size == aw.size):
            raise ParameterError("attribute edge arrays must share one length")
        self._validate_endpoints(eu, self.u_count, "edge u")
        self._validate_endpoints(ev, self.v_count, "edge v")
        self._validate_endpoints(au, self.u_count, "attribute edge u")
        self._validate_endpoints(aa, self.attr_count, "attribute edge attr")
        for label, w in (("edge", ew), ("attribute edge", aw)):
            if w.size and (not np.all(np.isfinite(w)) or np.any(w <= 0.0)):
                raise StructureError(f"{label} weights must be finite and positive")

        eu, ev, ew = _merge_coo(eu, ev, ew)
        au, aa, aw = _merge_coo(au, aa, aw)

        self.uv_indptr, self.uv_indices, self.uv_weights = _csr(eu, ev, ew, self.u_count)
        self.vu_indptr, self.vu_indices, self.vu_weights = _csr(
            *_merge_coo(ev, eu, ew), self.v_count
        )
        self.ua_indptr, self.ua_indices, self.ua_weights = _csr(au, aa, aw, self.u_count)
        self.au_indptr, self.au_indices, self.au_weights = _csr(
            *_merge_coo(aa, au, aw), self.attr_count
        )

        self.u_degree = self._row_sums(self.uv_indptr, self.uv_weights, self.u_count)
        self.v_degree = self._row_sums(self.vu_indptr, self.vu_weights, self.v_count)
        self.u_attr_weight = self._row_sums(self.ua_indptr, self.ua_weights, self.u_count)
        self.attr_weight = self._row_sums(self.au_indptr, self.au_weights, self.attr_count)

        self.uv_counts = np.diff(self.uv_indptr)
        self.vu_counts = np.diff(self.vu_indptr)
        self.ua_counts = np.diff(self.ua_indptr)
        self.au_counts = np.diff(self.au_indptr)

        self._u_index = {s: i for i, s in enumerate(self.u_ids)}
        self._v_index = {s: i for i, s in enumerate(self.v_ids)}
        self._attr_index = {s: i for i, s in enumerate(self.attr_ids)}

        self._alias_lock = threading.Lock()
        self._alias_tables: dict[str, object] = {}
        self._lambda_lock = threading.Lock()
        self._lambda_cache: dict[tuple[float, float, int], float] = {}

    @staticmethod
    def _validate_endpoints(idx: np.ndarray, bound: int, label: str) -> None:
        if idx.size and (idx.min() < 0 or idx.max() >= bound):
            raise ParameterError(f"{label} index out of range [0, {bound})")

    @staticmethod
    def _row_sums(indptr: np.ndarray, weights: np.ndarray, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=np.float64)
        if weights.size:
            rows = np.repeat(np.arange(n), np.diff(indptr))
            np.add.at(out, rows, weights)
        return out

    # -- basic shape ---------------------------------------------------------

    @property
    def edge_count(self) -> int:
        return int(self.uv_indices.size)

    @property
    def attr_edge_count(self) -> int:
        return int(self.ua_indices.size)

    def __repr__(self) -> str:
        return (
            f"AttributedBipartiteGraph(|U|={self.u_count}, |V|={self.v_count}, "
            f"|A|={self.attr_count}, |E|={self.edge_count}, |EA|={self.attr_edge_count})"
        )

    # -- id lookup -----------------------------------------------------------

    def u_index(self, node_id: str) -> int:
        try:
            return self._u_index[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown U node id {node_id!r}") from None

    def node_name(self, ref: NodeRef) -> str:
        ids = {Partition.U: self.u_ids, Partition.V: self.v_ids, Partition.ATTR: self.attr_ids}[
            ref.partition
        ]
        if not 0 <= ref.index < len(ids):
            raise UnknownNodeError(f"no {ref.partition.value} node at index {ref.index}")
        return ids[ref.index]

    # -- neighborhood views (sorted by neighbor index) ------------------------

    def u_neighbors(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.uv_indptr[u], self.uv_indptr[u + 1]
        return self.uv_indices[s:e], self.uv_weights[s:e]

    def v_neighbors(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.vu_indptr[v], self.vu_indptr[v + 1]
        return self.vu_indices[s:e], self.vu_weights[s:e]

    def u_attributes(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.ua_indptr[u], self.ua_indptr[u + 1]
        return self.ua_indices[s:e], self.ua_weights[s:e]

    def attribute_members(self, a: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.au_indptr[a], self.au_indptr[a + 1]
        return self.au_indices[s:e], self.au_weights[s:e]

    # -- cached per-edge scatter arrays ---------------------------------------
    # Row index per CSR entry plus the normalized one-hop coefficient. These
    # back both dense propagation and the push solvers.

    @cached_property
    def uv_rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.u_count), self.uv_counts)

    @cached_property
    def vu_rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.v_count), self.vu_counts)

    @cached_property
    def ua_rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.u_count), self.ua_counts)

    @cached_property
    def au_rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.attr_count), self.au_counts)

    @cached_property
    def uv_out_coef(self) -> np.ndarray:
        return self.uv_weights / self.u_degree[self.uv_rows]

    @cached_property
    def vu_out_coef(self) -> np.ndarray:
        return self.vu_weights / self.v_degree[self.vu_rows]

    @cached_property
    def ua_out_coef(self) -> np.ndarray:
        return self.ua_weights / self.u_attr_weight[self.ua_rows]

    @cached_property
    def au_out_coef(self) -> np.ndarray:
        return self.au_weights / self.attr_weight[self.au_rows]

    def alias_table(self, kind: str):
        """Lazily built alias sampler for one CSR direction (thread-safe)."""
        from .baselines import AliasTable

        with self._alias_lock:
            table = self._alias_tables.get(kind)
            if table is None:
                indptr, indices, weights = {
                    "uv": (self.uv_indptr, self.uv_indices, self.uv_weights),
                    "vu": (self.vu_indptr, self.vu_indices, self.vu_weights),
                    "ua": (self.ua_indptr, self.ua_indices, self.ua_weights),
                    "au": (self.au_indptr, self.au_indices, self.au_weights),
                }[kind]
                table = AliasTable(indptr, indices, weights)
                self._alias_tables[kind] = table
            return table


# -- TSV I/O -------------------------------------------------------------------


def _parse_pair_file(
    path: str,
    left_map: dict[str, int],
    right_map: dict[str, int],
    kind: str,
) -> tuple[list[int], list[int], list[float]]:
    """Parse one TSV relation file, growing the id maps in appearance order."""
    lefts: list[int] = []
    rights: list[int] = []
    weights: list[float] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ParseError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields, got {len(parts)}")
            lid, rid = parts[0], parts[1]
            if not lid or not rid:
                raise ParseError(f"{path}:{lineno}: empty node id")
            if len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad weight {parts[2]!r}") from None
                if not np.isfinite(w) or w <= 0.0:
                    raise ParseError(f"{path}:{lineno}: weight must be finite and positive, got {parts[2]}")
            else:
                w = 1.0
            if lid not in left_map:
                left_map[lid] = len(left_map)
            if rid not in right_map:
                right_map[rid] = len(right_map)
            lefts.append(left_map[lid])
            rights.append(right_map[rid])
            weights.append(w)
    logger.debug("parsed %d %s rows from %s", len(lefts), kind, path)
    return lefts, rights, weights


def load_graph(edge_path: str, attr_path: str | None = None) -> AttributedBipartiteGraph:
    """Load a graph from an edge TSV and an optional attribute TSV.

    Each data line is ``left_id<TAB>right_id[<TAB>weight]`` with weight
    defaulting to 1.0; ``#`` lines and blank lines are skipped. Ids are
    assigned dense indices in first-appearance order (edge file first), and
    repeated pairs merge by weight summation.
    """
    u_map: dict[str, int] = {}
    v_map: dict[str, int] = {}
    a_map: dict[str, int] = {}
    eu, ev, ew = _parse_pair_file(edge_path, u_map, v_map, "structure edge")
    if attr_path is not None:
        au, aa, aw = _parse_pair_file(attr_path, u_map, a_map, "attribute edge")
    else:
        au, aa, aw = [], [], []
    if not u_map:
        raise StructureError(f"{edge_path}: no query-side nodes found")
    return AttributedBipartiteGraph(
        list(u_map), list(v_map), list(a_map), (eu, ev, ew), (au, aa, aw)
    )


def save_graph(graph: AttributedBipartiteGraph, edge_path: str, attr_path: str | None = None) -> None:
    """Write the graph back to TSV with round-trippable weight formatting."""
    with open(edge_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# u_id\tv_id\tweight\n")
        for u in range(graph.u_count):
            cols, wts = graph.u_neighbors(u)
            for v, w in zip(cols.tolist(), wts.tolist()):
                fh.write(f"{graph.u_ids[u]}\t{graph.v_ids[v]}\t{w!r}\n")
    if attr_path is None:
        return
    with open(attr_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# u_id\tattr_id\tweight\n")
        for u in range(graph.u_count):
            cols, wts = graph.u_attributes(u)
            for a, w in zip(cols.tolist(), wts.tolist()):
                fh.write(f"{graph.u_ids[u]}\t{graph.attr_ids[a]}\t{w!r}\n")


# -- synthetic graphs ------------------------------------------------------------


def _draw_distinct_pairs(
    rng: np.random.Generator,
    n_left: int,
    n_right: int,
    count: int,
    right_probs: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``count`` distinct (left, right) pairs, keeping first-draw order."""
    keys = np.zeros(0, dtype=np.int64)
    while keys.size < count:
        need = count - keys.size
        batch = need + need // 2 + 16
        left = rng.integers(0, n_left, size=batch)
        if right_probs is None:
            right = rng.integers(0, n_right, size=batch)
        else:
            right = rng.choice(n_right, size=batch, p=right_probs)
        fresh = left * n_right + right
        combined = np.concatenate([keys, fresh])
        _, first = np.unique(combined, return_index=True)
        keys = combined[np.sort(first)]
    keys = keys[:count]
    return keys // n_right, keys % n_right


def generate_synthetic(
    u_count: int,
    v_count: int,
    attr_count: int,
    edge_count: int,
    attr_edge_count: int,
    seed: int,
) -> AttributedBipartiteGraph:
    """Generate a reproducible synthetic graph with hub-skewed V and attribute sides.

    U endpoints are uniform; V and attribute endpoints follow a shuffled
    power-law profile (probability of rank k proportional to 1/(k+1)), which
    reliably produces hub nodes. Edge weights are Uniform[0.5, 2.0]. The same
    seed always yields the same graph.
    """
    if u_count < 1 or v_count < 1:
        raise ParameterError("u_count and v_count must be at least 1")
    if attr_count < 0 or edge_count < 0 or attr_edge_count < 0:
        raise ParameterError("counts must be non-negative")
    if edge_count > u_count * v_count:
        raise ParameterError("edge_count exceeds distinct u-v pairs")
    if attr_edge_count > u_count * attr_count:
        raise ParameterError("attr_edge_count exceeds distinct u-attribute pairs")

    rng = np.random.Generator(np.random.Philox(seed))

    def skewed_probs(n: int) -> np.ndarray:
        p = 1.0 / (np.arange(n, dtype=np.float64) + 1.0)
        p /= p.sum()
        return p[rng.permutation(n)]

    if edge_count:
        eu, ev = _draw_distinct_pairs(rng, u_count, v_count, edge_count, skewed_probs(v_count))
        ew = rng.uniform(0.5, 2.0, size=edge_count)
    else:
        eu = ev = np.zeros(0, dtype=np.int64)
        ew = np.zeros(0)
    if attr_edge_count:
        au, aa = _draw_distinct_pairs(rng, u_count, attr_count, attr_edge_count, skewed_probs(attr_count))
        aw = rng.uniform(0.5, 2.0, size=attr_edge_count)
    else:
        au = aa = np.zeros(0, dtype=np.int64)
        aw = np.zeros(0)

    return AttributedBipartiteGraph(
        [f"u{i}" for i in range(u_count)],
        [f"v{i}" for i in range(v_count)],
        [f"a{i}" for i in range(attr_count)],
        (eu, ev, ew),
        (au, aa, aw),
    )
