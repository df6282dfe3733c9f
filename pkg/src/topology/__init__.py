"""Relay topology baselines package."""

from .baselines import (
    direct_topology,
    mst_topology,
    greedy_topology,
    optimal_topology,
    min_arborescence,
    enumerate_parent_assignments,
    OptimalSearchResult,
)

__all__ = [
    'direct_topology', 'mst_topology', 'greedy_topology', 'optimal_topology',
    'min_arborescence', 'enumerate_parent_assignments', 'OptimalSearchResult',
]
