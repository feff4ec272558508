"""Shared-dictionary sparse coding and sheaf topology for embedding networks.

Given one embedding matrix per agent over a common sample set, this
package learns (1) a shared dictionary with per-agent row-sparse codes
under a log-det diversity regularizer, and (2) a network of orthogonal
alignment maps between agents, selected by alignment loss. Analysis
utilities score the result: semantic signatures, cross-agent
classification accuracy, edge-loss separation, and recovered topology
against planted families.
"""

from .analysis import (
    AccuracyReport,
    EdgeLossStats,
    SemanticSignature,
    SignatureSimilarity,
    TopologyReport,
    adjusted_rand_index,
    average_accuracy,
    edge_loss_stats,
    semantic_signature,
    signature_similarity,
    split_columns,
    threshold_sweep,
    topology_quality,
)
from .bundle import (
    NetworkData,
    read_dictionary_artifacts,
    read_matrix,
    read_network,
    write_dictionary_artifacts,
    write_matrix,
    write_network,
)
from .core import (
    AgentEmbeddings,
    ConnectionSheaf,
    Dictionary,
    LearnConfig,
    Residuals,
    SheafLaplacian,
    SolverState,
    SparseCodes,
    StackedEmbeddings,
    Threshold,
    TopK,
    haar_orthogonal,
    parse_edge_rule,
    reconstruct,
    validate_network,
)
from .dictionary import (
    ConvergenceReport,
    init_state,
    learn_dictionary,
    objective_p2,
    project_oblique,
    prox_group_20,
    sca_admm_step,
    surrogate_objective,
    update_codes,
    update_dictionary,
)
from .errors import (
    BadBudget,
    BadSpec,
    ChecksumError,
    DimensionMismatch,
    FormatError,
    ManifestMismatch,
    NonFiniteData,
    SemnetError,
    SingularGramian,
    UnknownEdge,
    ZeroReference,
)
from .sheaf import (
    EdgeCandidate,
    build_coboundary,
    build_sheaf_laplacian,
    edge_loss,
    global_section_dim,
    is_local_section,
    learn_sheaf,
    procrustes_align,
    total_variation,
)
from .synthetic import SyntheticNetwork, SyntheticSpec, evenly_split_families, generate

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "AgentEmbeddings",
    "BadBudget",
    "BadSpec",
    "ChecksumError",
    "ConnectionSheaf",
    "ConvergenceReport",
    "Dictionary",
    "DimensionMismatch",
    "EdgeCandidate",
    "EdgeLossStats",
    "FormatError",
    "LearnConfig",
    "ManifestMismatch",
    "NetworkData",
    "NonFiniteData",
    "Residuals",
    "SemanticSignature",
    "SemnetError",
    "SheafLaplacian",
    "SignatureSimilarity",
    "SingularGramian",
    "SolverState",
    "SparseCodes",
    "StackedEmbeddings",
    "SyntheticNetwork",
    "SyntheticSpec",
    "Threshold",
    "TopK",
    "TopologyReport",
    "UnknownEdge",
    "ZeroReference",
    "adjusted_rand_index",
    "average_accuracy",
    "build_coboundary",
    "build_sheaf_laplacian",
    "edge_loss",
    "edge_loss_stats",
    "evenly_split_families",
    "generate",
    "global_section_dim",
    "haar_orthogonal",
    "init_state",
    "is_local_section",
    "learn_dictionary",
    "learn_sheaf",
    "objective_p2",
    "parse_edge_rule",
    "procrustes_align",
    "project_oblique",
    "prox_group_20",
    "read_dictionary_artifacts",
    "read_matrix",
    "read_network",
    "reconstruct",
    "sca_admm_step",
    "semantic_signature",
    "signature_similarity",
    "split_columns",
    "surrogate_objective",
    "threshold_sweep",
    "topology_quality",
    "total_variation",
    "update_codes",
    "update_dictionary",
    "validate_network",
    "write_dictionary_artifacts",
    "write_matrix",
    "write_network",
]
