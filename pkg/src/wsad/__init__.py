"""Weakly supervised anomaly scoring with cluster-based label cleaning."""

__version__ = "0.1.0"
