"""Account embeddings from temporal-amount transaction walks, evaluated as
link prediction over snapshot multigraphs of transfer records."""

from .embed import (
    EmbeddingSet,
    SgnsConfig,
    build_vocab,
    historical_step,
    load_embeddings,
    positive_pairs,
    save_embeddings,
    sgns_step,
    train,
)
from .ingest import (
    GraphStats,
    Transaction,
    TransactionFormatError,
    graph_stats,
    k_order_subgraph,
    parse_transactions,
    synth_temporal_graph,
    write_transactions,
)
from .linkpred import (
    EvalReport,
    SplitSpec,
    auc,
    average_precision,
    evaluate,
    hadamard_feature,
    make_split,
    precision_at_L,
    similarity_scores,
    train_classifier,
)
from .tasmg import (
    Tasmg,
    TasmgEdge,
    TasmgNode,
    accessible_edges,
    build_tasmg,
    load_tasmg,
    save_tasmg,
)
from .walker import (
    AliasTable,
    TransitionTable,
    WalkConfig,
    WalkCorpus,
    amount_prob,
    build_transition_table,
    generate_walks,
    joint_prob,
    load_corpus,
    save_corpus,
    temporal_prob,
)

__version__ = "0.1.0"

__all__ = [
    "AliasTable",
    "EmbeddingSet",
    "EvalReport",
    "GraphStats",
    "SgnsConfig",
    "SplitSpec",
    "Tasmg",
    "TasmgEdge",
    "TasmgNode",
    "Transaction",
    "TransactionFormatError",
    "TransitionTable",
    "WalkConfig",
    "WalkCorpus",
    "accessible_edges",
    "amount_prob",
    "auc",
    "average_precision",
    "build_tasmg",
    "build_transition_table",
    "build_vocab",
    "evaluate",
    "generate_walks",
    "graph_stats",
    "hadamard_feature",
    "historical_step",
    "joint_prob",
    "k_order_subgraph",
    "load_corpus",
    "load_embeddings",
    "load_tasmg",
    "make_split",
    "parse_transactions",
    "positive_pairs",
    "precision_at_L",
    "save_corpus",
    "save_embeddings",
    "save_tasmg",
    "sgns_step",
    "similarity_scores",
    "synth_temporal_graph",
    "temporal_prob",
    "train",
    "train_classifier",
    "write_transactions",
]
