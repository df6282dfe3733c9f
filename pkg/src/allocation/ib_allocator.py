"""
Iterative Balancing Slot Allocator

Max-min fair TDMA slot allocation for a fixed relay topology. Slot time is moved
from the device with the largest bits/Hz budget to the one with the smallest, with
a bisection on the transferred amount, until all budgets agree within eps1.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from config.settings import (
    DEFAULT_EPS1,
    DEFAULT_EPS2,
    IB_MAX_OUTER_ITERATIONS,
    IB_INVALID_TOPOLOGY_ITERATIONS,
    IB_PROGRESS_FRACTION,
    IB_STALL_ITERATIONS,
    SLOT_SUM_TOLERANCE,
)
from src.network.system_model import NetworkInstance, Topology, validate_topology

logger = logging.getLogger(__name__)


class IbNonConvergenceError(RuntimeError):
    """Raised when a valid topology hits the outer iteration cap while its gap still shrinks."""


class IbPremiseWarning(RuntimeWarning):
    """Emitted when B_k(c, 2*eps2) < eps1 does not hold for some device."""


@dataclass(frozen=True)
class IbConfig:
    """Tolerances of the iterative balancing allocator."""
    eps1: float = DEFAULT_EPS1  # bit*s/Hz, max-min gap at termination
    eps2: float = DEFAULT_EPS2  # seconds, minimum allocatable slot
    max_outer_iterations: int = IB_MAX_OUTER_ITERATIONS
    stall_iterations: int = IB_STALL_ITERATIONS

    def __post_init__(self):
        if self.eps1 <= 0:
            raise ValueError(f"eps1 must be positive, got {self.eps1}")
        if self.eps2 <= 0:
            raise ValueError(f"eps2 must be positive, got {self.eps2}")
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be at least 1")
        if self.stall_iterations < 1:
            raise ValueError("stall_iterations must be at least 1")


@dataclass(frozen=True, eq=False)
class SlotAllocation:
    """Per-device TDMA slots summing to the frame length T."""
    slots: np.ndarray
    frame_T: float

    def __post_init__(self):
        slots = np.array(self.slots, dtype=float)
        if slots.ndim != 1 or len(slots) == 0:
            raise ValueError("slots must be a non-empty vector")
        if np.any(slots <= 0):
            raise ValueError("All slots must be positive")
        if abs(slots.sum() - self.frame_T) > SLOT_SUM_TOLERANCE * self.frame_T:
            raise ValueError(f"Slots sum to {slots.sum()!r}, expected {self.frame_T!r}")
        slots.setflags(write=False)
        object.__setattr__(self, 'slots', slots)

    @classmethod
    def uniform(cls, n_devices: int, frame_T: float) -> "SlotAllocation":
        return cls(np.full(n_devices, frame_T / n_devices), frame_T)

    @property
    def shares(self) -> np.ndarray:
        """Fraction of the frame given to each device."""
        return self.slots / self.frame_T

    def __len__(self) -> int:
        return len(self.slots)


@dataclass(frozen=True, eq=False)
class IbResult:
    """Outcome of one allocation run."""
    slots: SlotAllocation
    b_ib: float
    budgets: np.ndarray
    outer_iterations: int
    converged: bool = True
    notes: list = field(default_factory=list)

    def __iter__(self):
        # Unpacks as (SlotAllocation, B_IB)
        yield self.slots
        yield self.b_ib

    @property
    def b_max(self) -> float:
        return float(np.max(self.budgets))


class _BudgetModel:
    """Per-device budgets of a one-hot topology as a fast function of the slot vector."""

    def __init__(self, instance: NetworkInstance, parents: Sequence[int]):
        self.parents = np.asarray(parents, dtype=int)
        self.n_devices = instance.n_devices
        gain = instance.link_gain(include_fading=True)[np.arange(self.n_devices), self.parents]
        # Gamma_k = a_k / t_k
        self.a = instance.harvested * gain / instance.params.noise_power

    def rates(self, t: np.ndarray) -> np.ndarray:
        return t * np.log2(1.0 + self.a / t)

    def budgets(self, t: np.ndarray) -> np.ndarray:
        r = self.rates(t)
        inbound = np.bincount(self.parents, weights=r, minlength=self.n_devices + 1)
        return r - inbound[:self.n_devices]


def bits_per_hz_for_parents(instance: NetworkInstance, parents: Sequence[int],
                            slots: Sequence[float]) -> np.ndarray:
    """Per-device budgets for a topology given as a parent vector."""
    return _BudgetModel(instance, parents).budgets(np.asarray(slots, dtype=float))


def allocate(instance: NetworkInstance, topology: Topology,
             config: Optional[IbConfig] = None) -> IbResult:
    """
    Balance slots so that max_k B_k - min_k B_k <= eps1.

    When no transfer can shrink the gap any further (a donor already sits at the
    eps2 floor, or the gap stops shrinking for `stall_iterations` outer iterations)
    the loop ends with `converged=False` and returns the slot vector with the
    largest min_k B_k seen so far.

    Args:
        instance: Network instance
        topology: One-hot topology (validity not required)
        config: Allocator tolerances

    Returns:
        IbResult; unpacks as (SlotAllocation, B_IB)

    Raises:
        IbNonConvergenceError: a valid topology still shrinks its gap after
            `max_outer_iterations` outer iterations
    """
    config = config or IbConfig()
    if topology.n_devices != instance.n_devices:
        raise ValueError("Topology and instance disagree on N_d")

    model = _BudgetModel(instance, topology.parents)
    n = instance.n_devices
    frame_T = instance.params.frame_T
    eps1, eps2 = config.eps1, config.eps2

    floor_rates = model.rates(np.full(n, 2 * eps2))
    if np.any(floor_rates >= eps1):
        warnings.warn(
            f"B_k(c, 2*eps2) >= eps1 for {int(np.sum(floor_rates >= eps1))} device(s); "
            "convergence of the balancing loop is not guaranteed",
            IbPremiseWarning,
            stacklevel=2,
        )

    valid = validate_topology(topology)
    limit = config.max_outer_iterations
    if not valid:
        limit = min(limit, IB_INVALID_TOPOLOGY_ITERATIONS)

    t = np.full(n, frame_T / n)
    budgets = model.budgets(t)
    delta1 = float(budgets.max() - budgets.min())
    best_t, best_budgets = t.copy(), budgets
    reference_gap = delta1
    last_progress = 0
    outer = 0

    def finish(slots: np.ndarray, values: np.ndarray, converged: bool, note: str = "") -> IbResult:
        slots = slots.copy()
        # paired transfers leave rounding drift only
        slots[np.argmax(slots)] += frame_T - slots.sum()
        return IbResult(
            slots=SlotAllocation(slots, frame_T),
            b_ib=float(values.min()),
            budgets=values,
            outer_iterations=outer,
            converged=converged,
            notes=[note] if note else [],
        )

    def unbalanced(note: str) -> IbResult:
        logger.debug("%s after %d outer iterations (gap %.3e)", note, outer, delta1)
        return finish(best_t, best_budgets, converged=False, note=note)

    while eps1 < delta1:
        outer += 1
        if outer > limit:
            if valid:
                raise IbNonConvergenceError(
                    f"Balancing did not converge within {limit} outer iterations (gap {delta1:.3e})"
                )
            return unbalanced("iteration limit on invalid topology")

        # argmax/argmin return the lowest index on ties
        i_star = int(np.argmax(budgets))
        j_star = int(np.argmin(budgets))
        if i_star == j_star:
            break

        delta = t[i_star]
        delta2 = delta1
        moved = False
        while delta > 2 * eps2 and eps1 < abs(delta2):
            delta /= 2
            donor, receiver = (i_star, j_star) if delta2 > 0 else (j_star, i_star)
            step = min(delta, t[donor] - eps2)
            if step > 0:
                t[donor] -= step
                t[receiver] += step
                moved = True
            budgets = model.budgets(t)
            delta2 = budgets[i_star] - budgets[j_star]

        delta1 = float(budgets.max() - budgets.min())
        if budgets.min() > best_budgets.min():
            best_t, best_budgets = t.copy(), budgets

        if delta1 <= eps1:
            break
        if not moved:
            return unbalanced("slot floor reached")
        if delta1 < (1.0 - IB_PROGRESS_FRACTION) * reference_gap:
            reference_gap, last_progress = delta1, outer
        elif outer - last_progress >= config.stall_iterations:
            return unbalanced("gap stopped shrinking")

    logger.debug("IB converged in %d outer iterations (gap %.3e)", outer, delta1)
    return finish(t, budgets, converged=True)


def b_ib(instance: NetworkInstance, topology: Topology, config: Optional[IbConfig] = None) -> float:
    """Balanced minimum budget B_IB(c) of a topology."""
    return allocate(instance, topology, config).b_ib
