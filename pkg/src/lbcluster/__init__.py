"""Simulation and analysis of distributed graph clustering by random-matching load balancing."""

from .graph import Graph, Partition, VolumeConvention, make_clustered_regular
from .protocol import ProtocolConfig, run_full
from .spectral import cluster_basis, gap_report, graph_spectrum

__all__ = [
    "Graph",
    "Partition",
    "ProtocolConfig",
    "VolumeConvention",
    "cluster_basis",
    "gap_report",
    "graph_spectrum",
    "make_clustered_regular",
    "run_full",
]
__version__ = "0.1.0"
