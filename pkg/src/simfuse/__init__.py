"""simfuse: multi-representation similarity fusion and evaluation.

Per-representation cosine similarity matrices, raw and z-normalized fusion,
exhaustive Gray-code subset search, contribution analyses, and the
layer-weighted 2AFC patch metric.
"""

from .analysis import (
    AblationReport,
    ExclusiveReport,
    FailureCase,
    HitSets,
    ParticipationReport,
    ablate,
    exclusive_contributions,
    failure_cases,
    hit_sets,
    oracle_recall,
    participation_ratio,
)
from .kernels import BACKEND as kernel_backend
from .patch import (
    ActivationStack,
    DistanceTable,
    LayerWeights,
    Triple2AFC,
    TwoAFCScore,
    best_single_layer,
    channel_normalize,
    judge_2afc,
    score_2afc,
    search_metric_combinations,
    single_layer_selector,
    weighted_layer_distance,
)
from .rng import Xoshiro256StarStar
from .search import (
    BestPerSize,
    SearchResults,
    best_per_size,
    search_all,
    write_best_per_size_csv,
    write_results_csv,
)
from .similarity import (
    NormStats,
    Ranking,
    RecallResult,
    SimilarityMatrix,
    combine_normalized,
    combine_raw,
    cosine_similarity_matrix,
    matrix_stats,
    rank_row,
    recall_at_k,
)
from .store import (
    FeatureSet,
    PairedGallery,
    ValidationError,
    ValidationReport,
    load_gallery,
    read_feature_set,
    validate_feature_set,
    write_feature_set,
)
from .subsets import SubsetMask, enumerate_subsets
from .synth import SynthSpec, brute_force_recall, generate_2afc_items, generate_gallery
from .tensorfile import FormatError

__version__ = "0.1.0"

__all__ = [
    "AblationReport",
    "ActivationStack",
    "BestPerSize",
    "DistanceTable",
    "ExclusiveReport",
    "FailureCase",
    "FeatureSet",
    "FormatError",
    "HitSets",
    "LayerWeights",
    "NormStats",
    "PairedGallery",
    "ParticipationReport",
    "Ranking",
    "RecallResult",
    "SearchResults",
    "SimilarityMatrix",
    "SubsetMask",
    "SynthSpec",
    "Triple2AFC",
    "TwoAFCScore",
    "ValidationError",
    "ValidationReport",
    "Xoshiro256StarStar",
    "ablate",
    "best_per_size",
    "best_single_layer",
    "brute_force_recall",
    "channel_normalize",
    "combine_normalized",
    "combine_raw",
    "cosine_similarity_matrix",
    "enumerate_subsets",
    "exclusive_contributions",
    "failure_cases",
    "generate_2afc_items",
    "generate_gallery",
    "hit_sets",
    "judge_2afc",
    "kernel_backend",
    "load_gallery",
    "matrix_stats",
    "oracle_recall",
    "participation_ratio",
    "rank_row",
    "read_feature_set",
    "recall_at_k",
    "score_2afc",
    "search_all",
    "search_metric_combinations",
    "single_layer_selector",
    "validate_feature_set",
    "weighted_layer_distance",
    "write_best_per_size_csv",
    "write_feature_set",
    "write_results_csv",
]
