"""
Generator Training

Unsupervised training of the topology generator: one latent sample and one ADAM
step per epoch, packet-tracing loss, early stopping on the champion loss and
post-processing of the champion to a hard topology.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from config.settings import (
    DEFAULT_MAX_EPOCHS,
    DEFAULT_SNAPSHOT_EPOCHS,
    PATIENCE_BASE_EPOCHS,
    PATIENCE_SCALE_EPOCHS,
)
from src.autodiff.tape import Tape, TapeDomainError
from src.network.system_model import NetworkInstance, Topology, validate_topology
from src.allocation.ib_allocator import IbConfig, IbNonConvergenceError, SlotAllocation, allocate
from src.topology.baselines import direct_topology
from src.evaluation.packet_tracing import PtConfig, rate_pt, training_loss
from .network import (
    AdamConfig,
    AdamState,
    GeneratorNet,
    SoftAdjacency,
    adam_step,
    forward,
    init_net,
    post_process,
)

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Raised when an epoch fails; the message carries the epoch number."""


@dataclass(frozen=True)
class TrainConfig:
    """Stopping rule and seeds of one training run."""
    max_epochs: int = DEFAULT_MAX_EPOCHS
    patience: Optional[int] = None  # None means ceil(30 + 500/N_d)
    net_seed: int = 0
    latent_seed: int = 1
    snapshot_epochs: Tuple[int, ...] = DEFAULT_SNAPSHOT_EPOCHS
    track_b_min: bool = True
    progress: bool = False

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be at least 1, got {self.max_epochs}")
        if self.patience is not None and self.patience < 1:
            raise ValueError(f"patience must be at least 1, got {self.patience}")

    def resolve_patience(self, n_devices: int) -> int:
        if self.patience is not None:
            return self.patience
        return math.ceil(PATIENCE_BASE_EPOCHS + PATIENCE_SCALE_EPOCHS / n_devices)


@dataclass
class TrainResult:
    """Outcome of a training run; unpacks as (net, champion, losses, b_min)."""
    net: GeneratorNet
    champion: SoftAdjacency
    losses: List[float]
    b_min: List[float]
    champion_epoch: int
    epochs: int
    snapshots: Dict[int, Topology] = field(default_factory=dict)

    def __iter__(self):
        yield self.net
        yield self.champion
        yield self.losses
        yield self.b_min

    @property
    def best_loss(self) -> float:
        return self.losses[self.champion_epoch]

    @property
    def running_min_loss(self) -> List[float]:
        return list(np.minimum.accumulate(self.losses))


class GeneratorTrainer:
    """Holds the network, optimizer state, latent stream and histories of one run."""

    def __init__(self, instance: NetworkInstance,
                 train_config: Optional[TrainConfig] = None,
                 pt_config: Optional[PtConfig] = None,
                 adam_config: Optional[AdamConfig] = None,
                 ib_config: Optional[IbConfig] = None,
                 net: Optional[GeneratorNet] = None,
                 adam_state: Optional[AdamState] = None):
        """
        Initialize trainer.

        Args:
            instance: Network instance to plan for
            train_config: Stopping rule and seeds
            pt_config: Evaluator settings
            adam_config: Optimizer hyper-parameters
            ib_config: Allocator tolerances for the B_min diagnostic
            net: Start from these parameters instead of a fresh init
            adam_state: Optimizer moments matching `net`
        """
        self.instance = instance
        self.train_config = train_config or TrainConfig()
        self.pt_config = pt_config or PtConfig()
        self.adam_config = adam_config or AdamConfig()
        self.ib_config = ib_config or IbConfig()

        n = instance.n_devices
        self.net = net if net is not None else init_net(n, self.train_config.net_seed)
        if self.net.n_devices != n:
            raise ValueError(f"Generator built for N_d={self.net.n_devices}, instance has {n}")
        self.adam_state = adam_state if adam_state is not None else AdamState.zeros_like(self.net.parameters())
        self.patience = self.train_config.resolve_patience(n)
        self.latent_rng = np.random.default_rng(self.train_config.latent_seed)

        self.epoch = 0
        self.losses: List[float] = []
        self.b_min: List[float] = []
        self.snapshots: Dict[int, Topology] = {}
        self.champion: Optional[SoftAdjacency] = None
        self.champion_epoch = -1
        self.epochs_since_best = 0
        self._b_ib_cache: Dict[Topology, float] = {}

    def _champion_b_min(self) -> float:
        topology = post_process(self.champion)
        if topology not in self._b_ib_cache:
            try:
                value = allocate(self.instance, topology, self.ib_config).b_ib
            except IbNonConvergenceError as e:
                logger.warning("B_min diagnostic failed at epoch %d: %s", self.epoch, e)
                value = float('nan')
            self._b_ib_cache[topology] = value
        return self._b_ib_cache[topology]

    def run_epoch(self) -> float:
        """One latent draw, forward pass, loss, backward pass and ADAM step."""
        z = self.latent_rng.random(self.net.latent_size)
        tape = Tape()
        params = self.net.bind(tape)
        try:
            soft = forward(self.net, z, tape, params)
            assessment = rate_pt(self.instance, soft.variable, self.pt_config, tape)
            loss = training_loss(assessment)
            grads = tape.backward(loss, params)
        except TapeDomainError as e:
            raise TrainingError(f"Epoch {self.epoch}: {e}") from e

        adam_step(self.net, grads, self.adam_config, self.adam_state)

        value = loss.item()
        self.losses.append(value)
        if self.champion is None or value < self.losses[self.champion_epoch]:
            self.champion = SoftAdjacency(soft.matrix)
            self.champion_epoch = self.epoch
            self.epochs_since_best = 0
        else:
            self.epochs_since_best += 1

        if self.train_config.track_b_min:
            self.b_min.append(self._champion_b_min())
        if self.epoch in self.train_config.snapshot_epochs:
            self.snapshots[self.epoch] = post_process(soft)

        logger.debug("Epoch %d loss %.6f (best %.6f)", self.epoch, value, self.losses[self.champion_epoch])
        self.epoch += 1
        return value

    @property
    def should_stop(self) -> bool:
        return self.epochs_since_best >= self.patience or self.epoch >= self.train_config.max_epochs

    def _run(self, epochs: int, stop_early: bool) -> None:
        iterator = range(epochs)
        if self.train_config.progress:
            iterator = tqdm(iterator, desc="Training", unit="epoch")
        for _ in iterator:
            if stop_early and self.should_stop:
                break
            self.run_epoch()

    def train(self) -> TrainResult:
        """Run until the champion has not improved for `patience` epochs or max_epochs."""
        self._run(max(self.train_config.max_epochs - self.epoch, 0), stop_early=True)
        logger.info("Training stopped at epoch %d (champion epoch %d, loss %.6f)",
                    self.epoch, self.champion_epoch, self.losses[self.champion_epoch])
        return self.result()

    def continue_for(self, extra_epochs: int) -> TrainResult:
        """Run exactly `extra_epochs` more epochs, ignoring the stopping rule."""
        if extra_epochs < 0:
            raise ValueError(f"extra_epochs must be non-negative, got {extra_epochs}")
        self._run(extra_epochs, stop_early=False)
        return self.result()

    def result(self) -> TrainResult:
        if self.champion is None:
            raise RuntimeError("No epoch has been run yet")
        return TrainResult(
            net=self.net,
            champion=self.champion,
            losses=list(self.losses),
            b_min=list(self.b_min),
            champion_epoch=self.champion_epoch,
            epochs=self.epoch,
            snapshots=dict(self.snapshots),
        )


def train(instance: NetworkInstance,
          train_config: Optional[TrainConfig] = None,
          pt_config: Optional[PtConfig] = None,
          adam_config: Optional[AdamConfig] = None,
          ib_config: Optional[IbConfig] = None) -> TrainResult:
    """Train a fresh generator on an instance."""
    return GeneratorTrainer(instance, train_config, pt_config, adam_config, ib_config).train()


@dataclass(frozen=True, eq=False)
class Proposal:
    """Proposed topology with its balanced slots; unpacks as (topology, slots, B_IB)."""
    topology: Topology
    slots: SlotAllocation
    b_ib: float
    b_max: float = float('nan')
    fallback: bool = False
    training: Optional[TrainResult] = None
    budgets: Optional[np.ndarray] = None  # B_i per device, bit*s/Hz

    def __iter__(self):
        yield self.topology
        yield self.slots
        yield self.b_ib

    @property
    def epochs(self) -> int:
        return self.training.epochs if self.training is not None else 0


def propose_topology(instance: NetworkInstance,
                     train_config: Optional[TrainConfig] = None,
                     pt_config: Optional[PtConfig] = None,
                     adam_config: Optional[AdamConfig] = None,
                     ib_config: Optional[IbConfig] = None) -> Proposal:
    """
    Train, harden the champion adjacency and balance its slots.

    A hardened topology that cannot reach the sink, or whose slots cannot be balanced,
    is replaced by the direct topology and the proposal is flagged with `fallback=True`.

    Args:
        instance: Network instance
        train_config: Stopping rule and seeds
        pt_config: Evaluator settings
        adam_config: Optimizer hyper-parameters
        ib_config: Allocator tolerances

    Returns:
        Proposal
    """
    n = instance.n_devices
    if n == 1:
        # the direct link is the only valid topology
        topology = direct_topology(1)
        result = allocate(instance, topology, ib_config)
        return Proposal(topology, result.slots, result.b_ib, result.b_max, budgets=result.budgets)

    training = train(instance, train_config, pt_config, adam_config, ib_config)
    topology = post_process(training.champion)
    fallback = False
    if not validate_topology(topology):
        logger.warning("Hardened topology %s does not reach the sink; using direct topology",
                       list(topology.parents))
        topology = direct_topology(n)
        fallback = True

    try:
        result = allocate(instance, topology, ib_config)
    except IbNonConvergenceError as e:
        logger.warning("Balancing the hardened topology %s failed (%s); using direct topology",
                       list(topology.parents), e)
        topology = direct_topology(n)
        fallback = True
        result = allocate(instance, topology, ib_config)
    return Proposal(topology, result.slots, result.b_ib, result.b_max,
                    fallback=fallback, training=training, budgets=result.budgets)
