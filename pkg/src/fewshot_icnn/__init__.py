"""Per-task dimensionality-reduction selection for few-shot classification.

Candidate feature reductions of an episodic task are ranked by the ICNN
(inter/intra-class nearest-neighbor) separability score; queries are then
classified by nearest class prototype in the winning representation.
"""

from .core import (
    DataError,
    DistanceMatrix,
    EmbeddingSet,
    EmbeddingStore,
    Episode,
    EpisodeSpec,
    NeighborSplit,
    euclidean_distances,
    knn_split,
    make_embedding_set,
    pairwise_distances,
    sample_episode,
)
from .icnn import (
    IcnnParams,
    backend_name,
    gamma_score,
    icnn_score,
    icnn_score_arrays,
    lambda_score,
    omega_score,
    per_point_terms,
)
from .pipeline import (
    EvalReport,
    IcnnConfig,
    PipelineConfig,
    build_candidates,
    classify,
    confidence_interval,
    evaluate,
    format_interval,
    prototypes,
    run_episode,
    select_best,
)
from .reducers import ReducedSet, ReducerFailure, ReducerSpec, fit_transform
from .storeio import load_labeled_set, load_store, save_labeled_set, save_store
from .synth import SynthSpec, generate_store, separability_scenarios

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DistanceMatrix",
    "EmbeddingSet",
    "EmbeddingStore",
    "Episode",
    "EpisodeSpec",
    "EvalReport",
    "IcnnConfig",
    "IcnnParams",
    "NeighborSplit",
    "PipelineConfig",
    "ReducedSet",
    "ReducerFailure",
    "ReducerSpec",
    "SynthSpec",
    "backend_name",
    "build_candidates",
    "classify",
    "confidence_interval",
    "euclidean_distances",
    "evaluate",
    "fit_transform",
    "format_interval",
    "gamma_score",
    "generate_store",
    "icnn_score",
    "icnn_score_arrays",
    "knn_split",
    "lambda_score",
    "load_labeled_set",
    "load_store",
    "make_embedding_set",
    "omega_score",
    "pairwise_distances",
    "per_point_terms",
    "prototypes",
    "run_episode",
    "sample_episode",
    "save_labeled_set",
    "save_store",
    "select_best",
    "separability_scenarios",
    "__version__",
]
