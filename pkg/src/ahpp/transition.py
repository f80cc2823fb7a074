"""Two-hop transition semantics between query-side nodes.

A step from a U-node goes out over a structure edge to V and back, or out
over an attribute edge and back, with ``beta`` weighting the attribute side.
Nodes missing one side simply lose that fraction of mass (absorption): rows
of the implied transition operator then sum to less than one, and no
renormalization is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .graph import AttributedBipartiteGraph

# Values below this are flushed to exact zero after each propagation, so that
# long geometric tails cannot keep denormal dust alive.
MASS_FLOOR = 1e-300


@dataclass(frozen=True)
class TransitionParams:
    """Blend weight between structure hops (1 - beta) and attribute hops (beta)."""

    beta: float = 0.35

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ParameterError(f"beta must lie in [0, 1], got {self.beta}")


def _check_u(graph: AttributedBipartiteGraph, u: int) -> None:
    if not 0 <= u < graph.u_count:
        raise ParameterError(f"U index {u} out of range [0, {graph.u_count})")


def structure_row(graph: AttributedBipartiteGraph, u: int) -> dict[int, float]:
    """One row of the structure transition: go to a shared V node and back.

    Entry j is the sum over common neighbors v of
    ``w(u,v)/d(u) * w(v,j)/d(v)``. Returns only nonzero entries. A node with
    no structure edges yields an empty row.
    """
    _check_u(graph, u)
    out: dict[int, float] = {}
    vs, wv = graph.u_neighbors(u)
    d_u = graph.u_degree[u]
    for v, w_uv in zip(vs.tolist(), wv.tolist()):
        first = w_uv / d_u
        back, wb = graph.v_neighbors(v)
        d_v = graph.v_degree[v]
        for j, w_vj in zip(back.tolist(), wb.tolist()):
            out[j] = out.get(j, 0.0) + first * (w_vj / d_v)
    return out

def attribute_row(graph: AttributedBipartiteGraph, u: int) -> dict[int, float]:
    """One row of the attribute transition: go to a shared attribute and back.

    Entry j sums, over attributes a held by both nodes,
    ``w(u,a)/W(u) * w(j,a)/W(a)`` where W(u) is u's total attribute weight and
    W(a) the attribute's total weight over its holders.
    """
    _check_u(graph, u)
    out: dict[int, float] = {}
    attrs, wa = graph.u_attributes(u)
    total = graph.u_attr_weight[u]
    for a, w_ua in zip(attrs.tolist(), wa.tolist()):
        first = w_ua / total
        holders, wh = graph.attribute_members(a)
        w_a = graph.attr_weight[a]
        for j, w_ja in zip(holders.tolist(), wh.tolist()):
            out[j] = out.get(j, 0.0) + first * (w_ja / w_a)
    return out


def structure_step(graph: AttributedBipartiteGraph, mass: np.ndarray) -> np.ndarray:
    """Push a U-mass vector through one structure two-hop (row-vector times operator)."""
    through_v = np.bincount(
        graph.uv_indices,
        weights=mass[graph.uv_rows] * graph.uv_out_coef,
        minlength=graph.v_count,
    )
    return np.bincount(
        graph.vu_indices,
        weights=through_v[graph.vu_rows] * graph.vu_out_coef,
        minlength=graph.u_count,
    )


def attribute_step(graph: AttributedBipartiteGraph, mass: np.ndarray) -> np.ndarray:
    """Push a U-mass vector through one attribute two-hop."""
    through_a = np.bincount(
        graph.ua_indices,
        weights=mass[graph.ua_rows] * graph.ua_out_coef,
        minlength=graph.attr_count,
    )
    return np.bincount(
        graph.au_indices,
        weights=through_a[graph.au_rows] * graph.au_out_coef,
        minlength=graph.u_count,
    )


def propagate_step(
    graph: AttributedBipartiteGraph,
    params: TransitionParams,
    mass: np.ndarray,
) -> np.ndarray:
    """One blended step: ``(1 - beta) * structure + beta * attribute``.

    The input is a dense non-negative vector over U; output entries smaller
    than MASS_FLOOR are flushed to zero. The operator is never materialized
    as a matrix; cost is linear in the number of edges.
    """
    mass = np.asarray(mass, dtype=np.float64)
    if mass.shape != (graph.u_count,):
        raise ParameterError(f"mass must have shape ({graph.u_count},)")
    beta = params.beta
    if beta >= 1.0:
        out = attribute_step(graph, mass)
    elif beta <= 0.0:
        out = structure_step(graph, mass)
    else:
        out = (1.0 - beta) * structure_step(graph, mass) + beta * attribute_step(graph, mass)
    out[out < MASS_FLOOR] = 0.0
    return out
