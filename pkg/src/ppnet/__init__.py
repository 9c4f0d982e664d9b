"""Prescriber-prescriber network analysis of prescription claims."""

from ppnet.ingest import ClaimRecord, IngestReport, parse_claims, validate_and_filter, partition_by_schedule
from ppnet.graph import BipartiteGraph, NodeAttr, WeightedGraph, build_bipartite, project
from ppnet.linkcomm import cluster_links, best_partition, partition_density, edge_similarity
from ppnet.surrogate import sample_surrogate, surrogate_test, max_partition_density_statistic

__version__ = "0.1.0"

__all__ = [
    "ClaimRecord",
    "IngestReport",
    "parse_claims",
    "validate_and_filter",
    "partition_by_schedule",
    "BipartiteGraph",
    "NodeAttr",
    "WeightedGraph",
    "build_bipartite",
    "project",
    "cluster_links",
    "best_partition",
    "partition_density",
    "edge_similarity",
    "sample_surrogate",
    "surrogate_test",
    "max_partition_density_statistic",
]
