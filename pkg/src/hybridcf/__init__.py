"""Collaborative-filtering recommendations of study-support tools and strategies."""

from .errors import ConfigError, EmptyResultError, HybridCFError, IngestError
from .evaluation import (
    EvaluationReport,
    GridSpec,
    SplitSpec,
    evaluate_config,
    grid_search,
    holdout_items,
    mae,
    precision_recall_at_k,
    relative_error,
    split_users,
)
from .kernels import BACKEND
from .predict import (
    HybridConfig,
    Recommendation,
    RecommendationList,
    Source,
    cold_start_profile,
    predict_hybrid,
    predict_item_based,
    predict_user_based,
)
from .ratings import (
    DEFAULT_MAPPING,
    Axis,
    ItemCatalog,
    ItemKind,
    LabelMapping,
    RatingsMatrix,
    filter_items,
    impute,
    ingest_csv,
    questionnaire_catalog,
)
from .similarity import NeighborSet, SimilarityMetric, compute_similarities, cosine, euclidean, pearson
from .synth import SynthSpec, generate

__version__ = "0.1.0"
