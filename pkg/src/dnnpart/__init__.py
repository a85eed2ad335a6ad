"""Design-space exploration of layer-wise DNN inference partitioning."""

from .graph import (
    DnnGraph,
    GraphError,
    LayerNode,
    LayerOrder,
    branch_subgraphs,
    cut_tensors,
    parse_graph,
    serialize_graph,
    topo_order,
)
from .cost import (
    AccuracyModel,
    CostEntry,
    CostError,
    LinkModel,
    PlatformModel,
    accuracy_eval,
    layer_cost,
    link_transfer,
)
from .memory import MemoryReport, memory_feasible, min_memory_order, segment_memory
from .evaluator import (
    Constraints,
    EvaluationRecord,
    ObjectiveWeights,
    PartitionScheme,
    SystemSpec,
    check_constraints,
    evaluate_scheme,
    throughput,
    weighted_cost,
)
from .optimizer import (
    GaParams,
    ParetoFront,
    crowding_distance,
    exhaustive_pareto,
    non_dominated_sort,
    nsga2,
    select_final,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyModel",
    "Constraints",
    "CostEntry",
    "CostError",
    "DnnGraph",
    "EvaluationRecord",
    "GaParams",
    "GraphError",
    "LayerNode",
    "LayerOrder",
    "LinkModel",
    "MemoryReport",
    "ObjectiveWeights",
    "ParetoFront",
    "PartitionScheme",
    "PlatformModel",
    "SystemSpec",
    "accuracy_eval",
    "branch_subgraphs",
    "check_constraints",
    "crowding_distance",
    "cut_tensors",
    "evaluate_scheme",
    "exhaustive_pareto",
    "layer_cost",
    "link_transfer",
    "memory_feasible",
    "min_memory_order",
    "non_dominated_sort",
    "nsga2",
    "parse_graph",
    "segment_memory",
    "select_final",
    "serialize_graph",
    "throughput",
    "topo_order",
    "weighted_cost",
]
