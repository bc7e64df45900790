"""Cell-based neural architecture search with a graph-convolution surrogate.

The pieces: a universal DAG cell representation (cellgraph), operator
embedding tables (embeddings), a trainable two-layer graph-convolution
scorer (gcn), pruning + differential-evolution search over supernets
(search), complexity counters and rank-correlation statistics (proxies),
and a reproducible CLI (cli).
"""

from .cellgraph import (
    CellGraph,
    EdgeOpCell,
    edge_to_node_transform,
    format_arch_string,
    parse_arch_string,
    validate_dag,
)
from .dataset import ArchDataset, ArchItem, read_jsonl, write_jsonl
from .embeddings import (
    OperatorEmbeddingTable,
    TripletConfig,
    build_fallback_table,
    cosine_similarity,
    embed,
    fallback_hash_embedder,
    load_table,
    pca_reduce,
    save_table,
    table_fingerprint,
    triplet_loss,
)
from .errors import CellnasError, NumericError, ValidationError
from .gcn import (
    GcnModel,
    TrainConfig,
    forward,
    graph_norm,
    load_model,
    loss,
    normalize_adjacency,
    normalize_labels,
    predict_scores,
    save_model,
    train,
)
from .proxies import (
    MacroConfig,
    ProxyScoreFrame,
    correlation_matrix,
    count_breakdown,
    count_flops,
    count_params,
    kendall_tau,
    nb201_macro,
    spearman_rho,
)
from .search import (
    CellType,
    EvoConfig,
    SearchSpace,
    Supernet,
    discretize,
    evo_search,
    hybrid_search,
    nb201_space,
    prune_search,
    prune_step,
    supernet_to_graphs,
    toy_space,
)

__version__ = "0.1.0"

__all__ = [
    "ArchDataset", "ArchItem", "CellGraph", "CellType", "CellnasError",
    "EdgeOpCell", "EvoConfig", "GcnModel", "MacroConfig",
    "NumericError", "OperatorEmbeddingTable", "ProxyScoreFrame",
    "SearchSpace", "Supernet", "TrainConfig", "TripletConfig",
    "ValidationError", "build_fallback_table", "correlation_matrix",
    "cosine_similarity", "count_breakdown", "count_flops", "count_params",
    "discretize", "edge_to_node_transform", "embed", "evo_search",
    "fallback_hash_embedder", "format_arch_string", "forward", "graph_norm",
    "hybrid_search", "kendall_tau", "load_model", "load_table", "loss",
    "nb201_macro", "nb201_space", "normalize_adjacency", "normalize_labels",
    "parse_arch_string", "pca_reduce", "predict_scores", "prune_search",
    "prune_step", "read_jsonl", "save_model", "save_table", "spearman_rho",
    "supernet_to_graphs", "table_fingerprint", "toy_space", "train",
    "triplet_loss", "validate_dag", "write_jsonl",
]
