"""Temporal graph contrastive learning with centrality-guided pruning and
adaptive edge-drop augmentation."""

from tgac.temporal_graph import (
    Event,
    EventStream,
    Split,
    StreamError,
    chronological_split,
    denormalize_time,
    ingest_csv,
    load_stream,
    normalize_time,
    save_stream,
)
from tgac.centrality import (
    CentralityTable,
    ScoredEdgeSet,
    compute_centrality,
    degree_centrality,
    edge_centrality,
    eigenvector_centrality,
    pagerank_centrality,
)
from tgac.pruning import PruneConfig, prune
from tgac.augmentation import AugmentConfig, removal_probabilities, sample_view
from tgac.errors import ConfigError, ConvergenceError, EvaluationError, TrainingDiverged

__version__ = "0.1.0"
