"""
Packet-Tracing Rate Evaluation

Backward-pass, congestion-aware rate assessment of a (soft or hard) relay topology.
Starting at the sink with an unbounded budget, each focused node keeps a share of its
budget and grants the rest to its inbound links, scaled down when the inbound link
rates exceed the remainder. The granted amounts are recorded on an autodiff tape so
the training loss can be differentiated with respect to the adjacency.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from config.settings import DEFAULT_BUDGET_THRESHOLD, ROW_SUM_TOLERANCE
from src.autodiff import tape as ad
from src.autodiff.tape import Tape, Variable
from src.network.system_model import NetworkInstance, Topology

logger = logging.getLogger(__name__)

UNBOUNDED = None  # budget marker of the sink call; min(1, .) is taken as 1


@dataclass(frozen=True)
class PtConfig:
    """Evaluator settings."""
    slot_scale: Optional[float] = None  # t in seconds; None means T/N_d
    budget_threshold: float = DEFAULT_BUDGET_THRESHOLD  # B_th in bit*s/Hz
    include_fading: bool = False

    def __post_init__(self):
        if self.slot_scale is not None and self.slot_scale <= 0:
            raise ValueError(f"slot_scale must be positive, got {self.slot_scale}")
        if self.budget_threshold <= 0:
            raise ValueError(f"budget_threshold must be positive, got {self.budget_threshold}")

    def resolve_slot_scale(self, instance: NetworkInstance) -> float:
        if self.slot_scale is not None:
            return self.slot_scale
        return instance.params.frame_T / instance.n_devices


@dataclass
class RateAssessment:
    """Granted budgets, net rates and per-device simulated rates of one assessment."""
    granted: Variable  # R, (N_d, N_d+1)
    net: Variable  # R_net, (N_d, N_d+1)
    rates: Variable  # R_sim, (N_d,)
    visited: np.ndarray
    expansions: List[int] = field(default_factory=list)

    @property
    def n_devices(self) -> int:
        return len(self.visited)

    @property
    def simulated_rates(self) -> np.ndarray:
        return np.array(self.rates.value)


def pt_link_rates(instance: NetworkInstance, config: PtConfig) -> np.ndarray:
    """
    Link rates used by the evaluator, t log2(1 + Gamma_{j,n}), shape (N_d, N_d+1).

    Gamma_{j,n} = (E_j / t) d_{j,n}^-alpha / N; link fading enters only when
    `config.include_fading` is set. Self-links have zero rate.
    """
    t = config.resolve_slot_scale(instance)
    gamma = (instance.harvested / t)[:, None] * instance.link_gain(config.include_fading)
    gamma = gamma / instance.params.noise_power
    return t * np.log2(1.0 + gamma)


def _as_variable(adjacency, tape: Tape) -> Variable:
    if isinstance(adjacency, Variable):
        return adjacency
    if isinstance(adjacency, Topology):
        return tape.constant(adjacency.adjacency.astype(float))
    if hasattr(adjacency, 'matrix'):
        # SoftAdjacency
        variable = getattr(adjacency, 'variable', None)
        if variable is not None and variable.tape is tape:
            return variable
        return tape.constant(adjacency.matrix)
    return tape.constant(np.asarray(adjacency, dtype=float))


def packet_trace(adjacency: Variable, link_rate: np.ndarray, budget_threshold: float,
                 tape: Tape) -> RateAssessment:
    """
    Run the packet-tracing recursion for given per-link rates.

    Args:
        adjacency: (N_d, N_d+1) row-stochastic Variable
        link_rate: (N_d, N_d+1) constant link rates t log2(1 + Gamma)
        budget_threshold: Children granted less than this are not expanded
        tape: Tape recording the computation

    Returns:
        RateAssessment
    """
    c = adjacency.value
    n = c.shape[0]
    if c.shape != (n, n + 1) or link_rate.shape != c.shape:
        raise ValueError(f"Adjacency must be N_d x (N_d+1), got {c.shape}")
    row_error = np.abs(c.sum(axis=1) - 1.0)
    if np.any(row_error > ROW_SUM_TOLERANCE):
        raise ValueError(f"Adjacency rows must sum to 1 (max deviation {row_error.max():.3e})")

    columns: List[Optional[Variable]] = [None] * (n + 1)
    visited = np.zeros(n, dtype=bool)
    expansions: List[int] = []

    def expand(node: int, budget: Optional[Variable]) -> None:
        expansions.append(node)
        inbound_mask = np.ones(n)
        if node < n:
            inbound_mask[node] = 0.0

        c_col = ad.column(adjacency, node)
        link = c_col * (link_rate[:, node] * inbound_mask)  # L_j
        inbound = ad.detach(ad.total(link))  # I

        if budget is UNBOUNDED:
            ratio = 1.0
        else:
            b = ad.detach(budget)  # B
            r_self = ad.detach(b / (1.0 + ad.total(c_col)))  # R_self
            if inbound.item() > 0.0:
                ratio = ad.min2(1.0, (b - r_self) / inbound)
            else:
                ratio = 1.0
        granted = link * ratio
        columns[node] = granted
        if node < n:
            visited[node] = True

        values = granted.value
        for j in range(n):
            if j != node and not visited[j] and values[j] >= budget_threshold:
                expand(j, ad.take(granted, j))

    expand(n, UNBOUNDED)

    zeros = np.zeros(n)
    columns = [col if col is not None else tape.constant(zeros) for col in columns]
    granted_matrix = ad.stack_columns(columns)

    device_block = ad.stack_columns(columns[:n])
    net_block = ad.relu(device_block - ad.transpose(device_block))
    net = ad.stack_columns([ad.column(net_block, j) for j in range(n)] + [columns[n]])
    rates = ad.total(net, axis=1)

    logger.debug("Packet tracing expanded %d node(s)", len(expansions))
    return RateAssessment(granted=granted_matrix, net=net, rates=rates,
                          visited=visited, expansions=expansions)


def rate_pt(instance: NetworkInstance, adjacency: Union[Variable, Topology, np.ndarray, "SoftAdjacency"],
            config: Optional[PtConfig] = None, tape: Optional[Tape] = None) -> RateAssessment:
    """
    Assess a soft or hard adjacency on an instance.

    Args:
        instance: Network instance
        adjacency: Soft adjacency (Variable or SoftAdjacency), hard Topology, or plain matrix
        config: Evaluator settings
        tape: Tape to record on (a new one if omitted)

    Returns:
        RateAssessment with differentiable R, R_net and R_sim
    """
    config = config or PtConfig()
    if tape is None:
        source = adjacency if isinstance(adjacency, Variable) else getattr(adjacency, "variable", None)
        tape = source.tape if source is not None else Tape()
    adjacency = _as_variable(adjacency, tape)
    if adjacency.shape != (instance.n_devices, instance.n_devices + 1):
        raise ValueError(f"Adjacency shape {adjacency.shape} does not match N_d={instance.n_devices}")
    return packet_trace(adjacency, pt_link_rates(instance, config), config.budget_threshold, tape)


def training_loss(assessment: RateAssessment) -> Variable:
    """L = (1/N_d) sum_i exp(-R_sim_i)."""
    rates = assessment.rates
    return ad.affine(ad.total(ad.exp(-rates)), 1.0 / assessment.n_devices)
