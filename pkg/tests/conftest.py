"""Shared fixtures: the four-node worked example, random graphs, a hub graph."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import pytest

from ahpp import AttributedBipartiteGraph, generate_synthetic

# The four-node worked example: u1..u4 share v2; v1 joins u1,u2; attributes
# overlap pairwise (a1: u1,u2; a2: u2,u3; a3: u1,u3; a4: u1,u4).
EXAMPLE_EDGES = [
    ("u1", "v1"), ("u1", "v2"),
    ("u2", "v1"), ("u2", "v2"),
    ("u3", "v2"), ("u3", "v3"),
    ("u4", "v2"), ("u4", "v3"), ("u4", "v4"),
]
EXAMPLE_ATTRS = [
    ("u1", "a1"), ("u1", "a3"), ("u1", "a4"),
    ("u2", "a1"), ("u2", "a2"),
    ("u3", "a2"), ("u3", "a3"),
    ("u4", "a4"),
]


def build_example_graph() -> AttributedBipartiteGraph:
    u_ids = ["u1", "u2", "u3", "u4"]
    v_ids = ["v1", "v2", "v3", "v4"]
    a_ids = ["a1", "a2", "a3", "a4"]
    eu = [u_ids.index(u) for u, _ in EXAMPLE_EDGES]
    ev = [v_ids.index(v) for _, v in EXAMPLE_EDGES]
    au = [u_ids.index(u) for u, _ in EXAMPLE_ATTRS]
    aa = [a_ids.index(a) for _, a in EXAMPLE_ATTRS]
    return AttributedBipartiteGraph(
        u_ids, v_ids, a_ids,
        (eu, ev, [1.0] * len(eu)),
        (au, aa, [1.0] * len(au)),
    )


def build_hub_graph(u_count: int = 30, funnel_w: float | None = None) -> AttributedBipartiteGraph:
    """Hub graph: v0 adjacent to exactly half of U, plus a mass funnel.

    Every node holds the one shared attribute, with one heavy holder whose
    weight scales with |U|. The funnel keeps the worst residue decaying
    slowly relative to the error scale, which is what drives the adaptive
    solver into its synchronous phase.
    """
    if funnel_w is None:
        funnel_w = 2.0 * u_count
    half = u_count // 2
    eu = list(range(half))
    ev = [0] * half
    n_ring = 8
    for i in range(u_count):
        eu.append(i)
        ev.append(1 + i % n_ring)
    au = list(range(u_count))
    aa = [0] * u_count
    aw = [1.0] * u_count
    aw[2] = funnel_w
    return AttributedBipartiteGraph(
        [f"u{i}" for i in range(u_count)],
        [f"v{i}" for i in range(1 + n_ring)],
        ["a0"],
        (eu, ev, [1.0] * len(eu)),
        (au, aa, aw),
    )


@lru_cache(maxsize=None)
def fixture_graphs() -> tuple[tuple[str, AttributedBipartiteGraph], ...]:
    """The named fixture set used by invariant and acceptance tests."""
    return (
        ("example", build_example_graph()),
        ("rnd15", generate_synthetic(15, 10, 6, 40, 25, seed=101)),
        ("rnd25", generate_synthetic(25, 18, 8, 80, 50, seed=102)),
        ("rnd40", generate_synthetic(40, 25, 10, 120, 90, seed=103)),
        ("rnd50", generate_synthetic(50, 30, 12, 180, 120, seed=104)),
        ("hub30", build_hub_graph(30)),
    )


FIXTURE_NAMES = ("example", "rnd15", "rnd25", "rnd40", "rnd50", "hub30")


def fixture_by_name(name: str) -> AttributedBipartiteGraph:
    return dict(fixture_graphs())[name]


@pytest.fixture
def example_graph() -> AttributedBipartiteGraph:
    return build_example_graph()


@pytest.fixture
def example_files(tmp_path):
    edges = tmp_path / "edges.tsv"
    attrs = tmp_path / "attrs.tsv"
    edges.write_text(
        "# structure edges\n"
        + "".join(f"{u}\t{v}\n" for u, v in EXAMPLE_EDGES),
        encoding="utf-8",
    )
    attrs.write_text(
        "".join(f"{u}\t{a}\n" for u, a in EXAMPLE_ATTRS),
        encoding="utf-8",
    )
    return str(edges), str(attrs)


def small_random_graph(seed: int) -> AttributedBipartiteGraph:
    """Size-varied random graph with |U| <= 50, used by the sweep tests."""
    u = 10 + 2 * seed
    v = 8 + seed
    a = 5 + seed // 2
    return generate_synthetic(u, v, a, 3 * u, 2 * u, seed=seed)


def exact_matrix_cache():
    """Per-test-session cache of dense exact score matrices."""
    return _EXACT_CACHE


_EXACT_CACHE: dict = {}


def cached_exact(graph_key: str, graph, alpha: float, beta: float, T: int = 200) -> np.ndarray:
    from .oracles import exact_scores

    key = (graph_key, alpha, beta, T)
    if key not in _EXACT_CACHE:
        _EXACT_CACHE[key] = exact_scores(graph, alpha, beta, T)
    return _EXACT_CACHE[key]
