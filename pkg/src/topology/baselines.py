"""
Baseline Relay Topologies

Comparison schemes for relay planning: direct connection, a minimum spanning arborescence
rooted at the sink, a greedy re-parenting pass, and exhaustive search over all
valid topologies.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from joblib import Parallel, delayed

from config.settings import OPTIMAL_MAX_DEVICES
from src.network.system_model import NetworkInstance, Topology, link_rates, validate_topology
from src.allocation.ib_allocator import (
    IbConfig,
    IbNonConvergenceError,
    SlotAllocation,
    allocate,
    bits_per_hz_for_parents,
)

logger = logging.getLogger(__name__)


def direct_topology(n_devices: int) -> Topology:
    """Every device transmits straight to the sink."""
    if n_devices < 1:
        raise ValueError(f"n_devices must be at least 1, got {n_devices}")
    return Topology.from_parents([n_devices] * n_devices)


def min_arborescence(costs: np.ndarray) -> np.ndarray:
    """
    Minimum-cost spanning arborescence rooted at the sink (Chu-Liu/Edmonds).

    Link costs are directed (a device's cost depends on its own harvested energy),
    so the tree is grown over the directed graph parent -> child. Edges are added in
    ascending (parent, child) order; equal-cost choices resolve to the earliest edge.

    Args:
        costs: (N_d, N_d+1) matrix, costs[i, j] is the cost of device i attaching to node j;
            non-finite entries mark missing links

    Returns:
        Parent vector of the arborescence (sink = N_d)
    """
    costs = np.asarray(costs, dtype=float)
    n = costs.shape[0]
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n + 1))
    for parent in range(n + 1):
        for child in range(n):
            if parent != child and np.isfinite(costs[child, parent]):
                graph.add_edge(parent, child, weight=float(costs[child, parent]))

    tree = nx.minimum_spanning_arborescence(graph, attr='weight')
    parents = np.full(n, -1, dtype=int)
    for parent, child in tree.edges():
        parents[child] = parent
    return parents


def _uniform_slots(instance: NetworkInstance) -> np.ndarray:
    return SlotAllocation.uniform(instance.n_devices, instance.params.frame_T).slots


def mst_topology(instance: NetworkInstance) -> Topology:
    """
    Minimum spanning tree towards the sink with link cost 1 / (t_i log2(1 + Gamma_{i,j}))
    evaluated at uniform slots t_i = T/N_d.
    """
    rates = link_rates(instance, _uniform_slots(instance))
    with np.errstate(divide='ignore'):
        costs = np.where(rates > 0, 1.0 / rates, np.inf)
    return Topology.from_parents(min_arborescence(costs), instance.n_devices)


def greedy_topology(instance: NetworkInstance, seed: int) -> Topology:
    """
    Greedy re-parenting starting from the direct topology.

    Devices are visited once in a seeded random order; each is attached to the node
    maximizing min(t_i log2(1 + Gamma_{i,j}), B_j) with B_sink = +inf. Moves that
    would disconnect a device from the sink are rejected.
    """
    n = instance.n_devices
    t = _uniform_slots(instance)
    rates = link_rates(instance, t)
    parents = np.full(n, n, dtype=int)
    budgets = bits_per_hz_for_parents(instance, parents, t)

    order = np.random.default_rng(seed).permutation(n)
    for i in order:
        candidates = np.array([j for j in range(n + 1) if j != i])
        node_budget = np.append(budgets, np.inf)
        scores = np.minimum(rates[i, candidates], node_budget[candidates])
        best = int(candidates[np.argmax(scores)])
        if best == parents[i]:
            continue

        trial = parents.copy()
        trial[i] = best
        if validate_topology(Topology.from_parents(trial, n)):
            parents = trial
            budgets = bits_per_hz_for_parents(instance, parents, t)
        else:
            logger.debug("Greedy move %d -> %d rejected (sink unreachable)", i, best)

    return Topology.from_parents(parents, n)


def enumerate_parent_assignments(n_devices: int) -> Iterator[Tuple[int, ...]]:
    """Every parent assignment where each device picks another device or the sink."""
    choices = [[j for j in range(n_devices + 1) if j != i] for i in range(n_devices)]
    return itertools.product(*choices)


@dataclass(frozen=True)
class OptimalSearchResult:
    """Best topology found by exhaustive search."""
    topology: Topology
    b_ib: float
    enumerated: int
    valid: int

    def __iter__(self):
        # Unpacks as (Topology, B_IB)
        yield self.topology
        yield self.b_ib


def _best_in_chunk(instance: NetworkInstance, chunk: List[Tuple[int, ...]],
                   config: IbConfig) -> Tuple[float, int]:
    best_value, best_pos = -np.inf, -1
    for pos, parents in enumerate(chunk):
        value = allocate(instance, Topology.from_parents(parents), config).b_ib
        if value > best_value:
            best_value, best_pos = value, pos
    return best_value, best_pos


def optimal_topology(instance: NetworkInstance, config: Optional[IbConfig] = None,
                     n_jobs: int = 1, chunk_size: int = 2048) -> OptimalSearchResult:
    """
    Exhaustive search: balance every valid topology and keep the best B_IB.

    Args:
        instance: Network instance (N_d <= OPTIMAL_MAX_DEVICES)
        config: Allocator tolerances
        n_jobs: joblib worker count for evaluating topologies
        chunk_size: Topologies per joblib task

    Returns:
        OptimalSearchResult; unpacks as (Topology, B_IB)
    """
    n = instance.n_devices
    if n > OPTIMAL_MAX_DEVICES:
        raise ValueError(f"Exhaustive search is limited to N_d <= {OPTIMAL_MAX_DEVICES}, got {n}")
    config = config or IbConfig()

    enumerated = 0
    valid: List[Tuple[int, ...]] = []
    for parents in enumerate_parent_assignments(n):
        enumerated += 1
        if validate_topology(Topology.from_parents(parents, n)):
            valid.append(parents)
    logger.info("Exhaustive search N_d=%d: %d assignments, %d valid", n, enumerated, len(valid))

    chunks = [valid[k:k + chunk_size] for k in range(0, len(valid), chunk_size)]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_best_in_chunk)(instance, chunk, config) for chunk in chunks
    )

    best_value, best_parents = -np.inf, None
    for chunk, (value, pos) in zip(chunks, results):
        if pos >= 0 and value > best_value:
            best_value, best_parents = value, chunk[pos]
    if best_parents is None:
        raise IbNonConvergenceError("No valid topology could be balanced")

    return OptimalSearchResult(
        topology=Topology.from_parents(best_parents, n),
        b_ib=float(best_value),
        enumerated=enumerated,
        valid=len(valid),
    )
