"""Estimate the number of clusters by maximizing a standardized
within-cluster edge count on a similarity graph."""
from .cluster import KMeansConfig, accuracy, kmeans, load_labels
from .edgecount import (
    ClusterLabels,
    QProfile,
    estimate_k,
    null_moments,
    q_statistic,
    within_counts,
)
from .graph import (
    SimilarityGraph,
    build_kmst,
    build_knn,
    graph_from_edges,
    graph_stats,
    pairwise_distances,
)

__version__ = "0.1.0"
