"""Spectral clustering under center separation, with numerical checks of its guarantees."""

from .algorithm import ClusterOptions, ClusterRunResult, cluster, part_one, part_three, part_two
from .analysis import (
    CenterMatching,
    EvaluationReport,
    InequalityCheck,
    evaluate,
    match_centers,
    run_suites,
)
from .errors import (
    ConvergenceWarning,
    DegenerateLineError,
    GenerationError,
    InputError,
    NumericError,
    SepClusterError,
)
from .kmeans import KMeansSolution, approx_kmeans
from .linalg import spectral_norm, truncated_svd
from .model import (
    SpectralStats,
    TargetClustering,
    build_target,
    proximity_report,
    spectral_stats,
)

__version__ = "0.1.0"

__all__ = [
    "CenterMatching",
    "ClusterOptions",
    "ClusterRunResult",
    "ConvergenceWarning",
    "DegenerateLineError",
    "EvaluationReport",
    "GenerationError",
    "InequalityCheck",
    "InputError",
    "KMeansSolution",
    "NumericError",
    "SepClusterError",
    "SpectralStats",
    "TargetClustering",
    "approx_kmeans",
    "build_target",
    "cluster",
    "evaluate",
    "match_centers",
    "part_one",
    "part_three",
    "part_two",
    "proximity_report",
    "run_suites",
    "spectral_norm",
    "spectral_stats",
    "truncated_svd",
]
