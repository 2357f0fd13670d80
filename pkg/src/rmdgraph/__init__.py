"""Rank-modulated-degree graphs for spectral clustering and SSL on unbalanced data."""

from .dataset import (
    DataSet,
    MixtureSpec,
    fig2_mixture,
    fig5_mixture,
    gen_gaussian_mixture,
    gen_two_moons_gaussian,
    load_csv,
    load_json,
    subsample_unbalanced,
)
from .errors import ConfigError, DataError, GraphError, NumericalError, RMDError
from .graphs import (
    GraphFamilyParams,
    SparseGraph,
    build_baseline,
    build_epsilon,
    build_full_arbf,
    build_full_rbf,
    build_knn,
    build_rmd,
    degree_schedule,
    mean_knn_distance,
)
from .metrics import clustering_error, cut_diagnostics, objective_value, sc_fails_predicate
from .modelsel import cut0_evaluate, delta_sweep, flat_spots, reference_graph, select, sweep
from .rank import RankEstimate, compute_ranks, g_statistic, knn_distances, rank_queries
from .spectral import Partition, laplacian, spectral_cluster
from .ssl import SoftLabels, grf_solve, predict

__version__ = "0.1.0"

__all__ = [
    "DataSet", "MixtureSpec", "fig2_mixture", "fig5_mixture", "gen_gaussian_mixture",
    "gen_two_moons_gaussian", "load_csv", "load_json", "subsample_unbalanced",
    "ConfigError", "DataError", "GraphError", "NumericalError", "RMDError",
    "GraphFamilyParams", "SparseGraph", "build_baseline", "build_epsilon", "build_full_arbf",
    "build_full_rbf", "build_knn", "build_rmd", "degree_schedule", "mean_knn_distance",
    "clustering_error", "cut_diagnostics", "objective_value", "sc_fails_predicate",
    "cut0_evaluate", "delta_sweep", "flat_spots", "reference_graph", "select", "sweep",
    "RankEstimate", "compute_ranks", "g_statistic", "knn_distances", "rank_queries",
    "Partition", "laplacian", "spectral_cluster", "SoftLabels", "grf_solve", "predict",
]
