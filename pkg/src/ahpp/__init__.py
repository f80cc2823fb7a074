"""Similarity search on attributed bipartite graphs.

Scores measure how often a stopping two-hop random walk from a query node,
mixing structure hops and attribute hops, ends at each candidate node. Five
solvers trade accuracy guarantees against work: exact iteration, sampling,
and three local-push variants.
"""

from .baselines import (
    AliasTable,
    MCParams,
    QueryParams,
    ScoreVector,
    default_r_max,
    default_walk_count,
    forward_push,
    ground_truth,
    ground_truth_iterations,
    monte_carlo,
    power_iteration,
)
from .errors import (
    GraphError,
    ParameterError,
    ParseError,
    StructureError,
    TimeBudgetExceeded,
    UnknownNodeError,
)
from .evaluation import (
    BenchRow,
    ClusterGroundTruth,
    EvalReport,
    SOLVER_NAMES,
    benchmark_sweep,
    f1_at_k,
    link_prediction,
    load_clusters,
    make_solver,
    power_iterations_for,
    remove_edges,
    sample_queries,
    topk_precision,
    write_bench_csv,
)
from .graph import (
    AttributedBipartiteGraph,
    NodeRef,
    Partition,
    generate_synthetic,
    load_graph,
    save_graph,
)
from .push import (
    AsrpParams,
    PushState,
    app,
    asrp,
    estimate_lambda,
    iterative_invariance_check,
    resolved_lambda,
    run_app,
    run_asrp,
)
from .transition import (
    MASS_FLOOR,
    TransitionParams,
    attribute_row,
    attribute_step,
    propagate_step,
    structure_row,
    structure_step,
)

__version__ = "0.1.0"

__all__ = [
    "AliasTable",
    "AsrpParams",
    "AttributedBipartiteGraph",
    "BenchRow",
    "ClusterGroundTruth",
    "EvalReport",
    "GraphError",
    "MASS_FLOOR",
    "MCParams",
    "NodeRef",
    "ParameterError",
    "ParseError",
    "Partition",
    "PushState",
    "QueryParams",
    "ScoreVector",
    "SOLVER_NAMES",
    "StructureError",
    "TimeBudgetExceeded",
    "TransitionParams",
    "UnknownNodeError",
    "app",
    "asrp",
    "attribute_row",
    "attribute_step",
    "benchmark_sweep",
    "default_r_max",
    "default_walk_count",
    "estimate_lambda",
    "f1_at_k",
    "forward_push",
    "generate_synthetic",
    "ground_truth",
    "ground_truth_iterations",
    "iterative_invariance_check",
    "link_prediction",
    "load_clusters",
    "load_graph",
    "make_solver",
    "monte_carlo",
    "power_iteration",
    "power_iterations_for",
    "propagate_step",
    "remove_edges",
    "resolved_lambda",
    "run_app",
    "run_asrp",
    "sample_queries",
    "save_graph",
    "structure_row",
    "structure_step",
    "topk_precision",
    "write_bench_csv",
]
