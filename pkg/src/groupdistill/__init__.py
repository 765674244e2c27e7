"""groupdistill: discriminability-weighted group representations.

The pipeline in one breath: score how separable each element's embedding is
(:mod:`~groupdistill.scoring`), distill those scores into a regressor that
needs no labels (:mod:`~groupdistill.distill`), pool each group's embeddings
weighted by predicted score (:mod:`~groupdistill.aggregate`), and measure the
result with verification and identification metrics
(:mod:`~groupdistill.metrics`). :mod:`~groupdistill.synth` generates
deterministic benchmark corpora and :mod:`~groupdistill.io` reads and writes
every artifact.
"""

from .aggregate import (
    AggregationPolicy,
    GroupAggregator,
    GroupRepresentation,
    STRATEGIES,
    aggregate,
    count_base_evaluations,
    filter_by_score,
    represent_corpus,
    represent_group,
    rescale,
)
from .data import Corpus, DiscriminabilityRecord, ElementRecord, UNLABELED
from .distill import (
    DiscriminabilityRegressor,
    gradient_check,
    load_model,
    mse_loss,
    save_model,
)
from .exceptions import (
    DegenerateClassError,
    DivergenceError,
    FormatError,
    GroupDistillError,
    MissingClassError,
    NearSingularRatioError,
    ParseError,
    ProtocolError,
    SchemaError,
    ValidationError,
)
from .io import (
    load_corpus,
    load_groups,
    load_pairs,
    load_scores,
    save_corpus,
    save_groups,
    save_pairs,
    save_scores,
)
from .metrics import (
    EvalProtocol,
    EvalReport,
    OperatingPoint,
    cmc_map,
    compare_strategies,
    evaluate_groups,
    pair_similarity,
    protocol_from_labels,
    roc_points,
    tar_at_far,
    verification_accuracy,
)
from .scoring import (
    CentroidTable,
    DiscriminabilityScorer,
    NormalizationStats,
    class_centroids,
    compute_centroids,
    cosine_similarity,
    logistic,
    normalize_scores,
    raw_ratio,
    score_corpus,
    similarity_ratios,
)
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "AggregationPolicy", "CentroidTable", "Corpus", "DegenerateClassError",
    "DiscriminabilityRecord", "DiscriminabilityRegressor",
    "DiscriminabilityScorer", "DivergenceError", "ElementRecord",
    "EvalProtocol", "EvalReport", "FormatError", "GroupAggregator",
    "GroupDistillError", "GroupRepresentation", "MissingClassError",
    "NearSingularRatioError", "NormalizationStats", "OperatingPoint",
    "ParseError", "ProtocolError", "STRATEGIES", "SchemaError", "SynthConfig",
    "UNLABELED", "ValidationError", "aggregate", "class_centroids", "cmc_map",
    "compare_strategies", "compute_centroids", "cosine_similarity",
    "count_base_evaluations", "evaluate_groups", "filter_by_score",
    "generate", "gradient_check", "load_corpus", "load_groups", "load_model",
    "load_pairs", "load_scores", "logistic", "mse_loss", "normalize_scores",
    "pair_similarity", "protocol_from_labels", "raw_ratio",
    "represent_corpus", "represent_group", "rescale", "roc_points",
    "save_corpus", "save_groups", "save_model", "save_pairs", "save_scores",
    "score_corpus", "similarity_ratios", "tar_at_far",
    "verification_accuracy", "__version__",
]
