"""Churn prediction and game ranking on temporal play graphs.

The library covers the full pipeline: daily bipartite snapshots with censored
churn labels, similarity-augmented random-walk contexts, an inductive
edge-embedding model trained on a joint supervised/contextual/temporal
objective, and macro game rankings (probability sums, PageRank, HITS) with
rank-quality metrics.
"""

from .backend import BACKEND
from .errors import (
    ConfigError,
    DataError,
    DeadEndError,
    EmptyBatchError,
    EmptyInputError,
    GamechurnError,
    NoEdgeError,
    NotPresentError,
    NumericError,
    OutOfRangeError,
    SchemaError,
    UndefinedMetricError,
    VocabError,
)
from .graph import (
    EdgeLabel,
    FeatureSchema,
    Label,
    NodeId,
    NodeKind,
    Snapshot,
    TemporalBipartiteGraph,
    block_cosines,
    edge_features,
    edge_label,
    game,
    persistent_edges,
    player,
    uniform_schema,
)
from .loss import (
    LossWeights,
    TemporalPair,
    regularization_loss,
    supervised_loss,
    temporal_loss,
    total_loss,
    unsupervised_loss,
)
from .metrics import (
    auc,
    avg_precision_at_k,
    kendall_tau,
    mean_average_precision,
    position_weighted_ap,
    precision_recall,
    spearman,
    weighted_kendall_tau,
)
from .model import (
    Batch,
    EdgeVocabulary,
    ModelParams,
    backward,
    batch_loss,
    context_log_prob,
    init_params,
    load_checkpoint,
    predict_proba,
    save_checkpoint,
)
from .rank import (
    HitsResult,
    PageRankResult,
    RankedList,
    RelationGraph,
    hits,
    pagerank,
    rank_games,
    read_ranked_list,
    simsum,
    write_ranked_list,
)
from .synth import SynthConfig, churn_probability, generate, realized_churn_counts
from .train import (
    AdamState,
    TrainConfig,
    TrainResult,
    adam_step,
    chronological_split,
    decayed_lr,
    predict,
    train,
)
from .walk import (
    AugmentedGraph,
    WalkConfig,
    build_augmented,
    node_similarity,
    sample_contexts,
    sample_contexts_batch,
    transition_distribution,
)

__version__ = "0.1.0"
