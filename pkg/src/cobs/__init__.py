"""Constraint-based clustering selection (COBS).

Generate a large ensemble of unsupervised clusterings by sweeping K-means,
DBSCAN and spectral clustering over hyperparameter grids, then use pairwise
must-link / cannot-link constraints to pick the member that satisfies the
most of them, either from a random batch of constraints or by actively
querying the most-disputed pairs.
"""

from .constraints import (
    Constraint,
    ConstraintSet,
    Kind,
    SimulatedOracle,
    generate_random_constraints,
    satisfaction_score,
)
from .data import (
    Dataset,
    DatasetError,
    DistanceStats,
    SupervisionSplit,
    distance_stats,
    load_dataset,
    normalize,
    parse_dataset,
    split_supervision,
)
from .engines import (
    NOISE,
    Clustering,
    ClusteringEnsemble,
    HyperGrid,
    Provenance,
    SpectralDegenerateError,
    generate_ensemble,
    rerun,
    run_dbscan,
    run_kmeans,
    run_spectral,
)
from .evaluation import (
    ExperimentSpec,
    ResultTable,
    adjusted_rand_index,
    evaluate_selected,
    run_experiment,
)
from .selection import (
    ActiveConfig,
    ActiveSession,
    cobs_select,
    numsat_select,
    run_active_session,
    silhouette_select,
    weighted_agreement,
)

__all__ = [
    "NOISE",
    "ActiveConfig",
    "ActiveSession",
    "Clustering",
    "ClusteringEnsemble",
    "Constraint",
    "ConstraintSet",
    "Dataset",
    "DatasetError",
    "DistanceStats",
    "ExperimentSpec",
    "HyperGrid",
    "Kind",
    "Provenance",
    "ResultTable",
    "SimulatedOracle",
    "SpectralDegenerateError",
    "SupervisionSplit",
    "adjusted_rand_index",
    "cobs_select",
    "distance_stats",
    "evaluate_selected",
    "generate_ensemble",
    "generate_random_constraints",
    "load_dataset",
    "normalize",
    "numsat_select",
    "parse_dataset",
    "rerun",
    "run_active_session",
    "run_dbscan",
    "run_experiment",
    "run_kmeans",
    "run_spectral",
    "satisfaction_score",
    "silhouette_select",
    "split_supervision",
    "weighted_agreement",
]

__version__ = "0.1.0"
