"""Entity resolution toolkit: vectorize, block, match, and evaluate.

The package turns entity tables into schema-agnostic sentences, embeds them,
finds candidate duplicates with nearest-neighbour search, picks one-to-one
matches greedily by similarity, and scores every stage against ground truth.
A synthetic data generator with controlled corruption closes the loop for
benchmarking.
"""

from .blocking import (
    CandidateSet,
    block_clean_clean,
    block_dirty,
    blocking_precision,
    blocking_recall,
    load_candidates,
    write_candidates,
)
from .config import PipelineConfig, load_config
from .datagen import (
    FrequencyTable,
    GeneratedDataset,
    GenParams,
    corrupt_entity,
    default_vocabulary,
    generate_clean_entities,
    generate_dirty_dataset,
    load_frequency_table,
)
from .embedding import (
    CharNGramEmbedder,
    EmbeddedCollection,
    PrecomputedEmbedder,
    WordAverageEmbedder,
    WordVectorTable,
    embed_collection,
    load_precomputed,
    load_word_table,
)
from .embv import read_embv, write_embv
from .errors import ConfigError, DataError, DimensionError
from .evaluation import (
    MetricTriple,
    RankResult,
    ScoreMatrix,
    emit_report,
    match_metrics,
    pearson,
    rank_models,
)
from .matching import (
    MatchSet,
    ScoredPair,
    SweepPoint,
    SweepResult,
    cross_product,
    load_matches,
    mutual_best_clustering,
    proposal_clustering,
    score_pairs,
    threshold_sweep,
    to_similarity,
    unique_mapping_clustering,
    write_curve,
    write_matches,
)
from .model import (
    Entity,
    EntityCollection,
    ERTask,
    GroundTruth,
    ValidationReport,
    load_csv,
    load_groundtruth,
    normalize_pair,
    validate_task,
    write_csv,
    write_groundtruth,
)
from .nn import ExactNearestNeighbors, HnswNearestNeighbors, Neighbor, exact_knn
from .text import Sentence, build_sentence, tokenize

__version__ = "1.0.0"

__all__ = [
    "CandidateSet",
    "CharNGramEmbedder",
    "ConfigError",
    "DataError",
    "DimensionError",
    "EmbeddedCollection",
    "Entity",
    "EntityCollection",
    "ERTask",
    "ExactNearestNeighbors",
    "FrequencyTable",
    "GeneratedDataset",
    "GenParams",
    "GroundTruth",
    "HnswNearestNeighbors",
    "MatchSet",
    "Neighbor",
    "MetricTriple",
    "PipelineConfig",
    "PrecomputedEmbedder",
    "RankResult",
    "ScoreMatrix",
    "ScoredPair",
    "Sentence",
    "SweepPoint",
    "SweepResult",
    "ValidationReport",
    "WordAverageEmbedder",
    "WordVectorTable",
    "block_clean_clean",
    "block_dirty",
    "blocking_precision",
    "blocking_recall",
    "build_sentence",
    "corrupt_entity",
    "cross_product",
    "default_vocabulary",
    "embed_collection",
    "exact_knn",
    "emit_report",
    "generate_clean_entities",
    "generate_dirty_dataset",
    "load_candidates",
    "load_config",
    "load_csv",
    "load_frequency_table",
    "load_groundtruth",
    "load_matches",
    "load_precomputed",
    "load_word_table",
    "match_metrics",
    "mutual_best_clustering",
    "normalize_pair",
    "pearson",
    "proposal_clustering",
    "rank_models",
    "read_embv",
    "score_pairs",
    "threshold_sweep",
    "to_similarity",
    "unique_mapping_clustering",
    "validate_task",
    "write_candidates",
    "write_csv",
    "write_curve",
    "write_embv",
    "write_groundtruth",
    "write_matches",
]
