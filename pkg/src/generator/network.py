"""
Topology Generator Network

Four fully connected layers with ReLU activations between them, a reshape of the
output vector into an N_d x (N_d+1) matrix and a row softmax. Layer widths grow in
an arithmetic sequence from ceil(N_d sqrt(N_d)) to N_d (N_d+1). Parameters are
trained with ADAM; checkpoints are numpy archives.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import (
    DEFAULT_LEARNING_RATE,
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_ADAM_EPSILON,
    CHECKPOINT_FORMAT_VERSION,
)
from src.autodiff import tape as ad
from src.autodiff.tape import Tape, Variable
from src.network.system_model import Topology

N_LAYERS = 4


class CheckpointFormatError(ValueError):
    """Raised when a checkpoint archive is missing fields or has the wrong version."""


def layer_sizes(n_devices: int) -> Tuple[int, ...]:
    """Widths s_0..s_4 of the generator for N_d devices."""
    if n_devices < 1:
        raise ValueError(f"n_devices must be at least 1, got {n_devices}")
    s0 = math.ceil(n_devices * math.sqrt(n_devices))
    s4 = n_devices * (n_devices + 1)
    # nearest integer, halves rounded up
    middle = [int(math.floor(s0 + k * (s4 - s0) / N_LAYERS + 0.5)) for k in range(1, N_LAYERS)]
    return (s0, *middle, s4)


@dataclass(frozen=True, eq=False)
class SoftAdjacency:
    """Row-stochastic relaxed adjacency; `variable` links it to the tape that produced it."""
    matrix: np.ndarray
    variable: Optional[Variable] = None

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        n = matrix.shape[0]
        if matrix.ndim != 2 or matrix.shape[1] != n + 1:
            raise ValueError(f"SoftAdjacency must be N_d x (N_d+1), got {matrix.shape}")
        if np.any(np.abs(matrix.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("SoftAdjacency rows must sum to 1")
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @property
    def n_devices(self) -> int:
        return self.matrix.shape[0]


@dataclass(eq=False)
class GeneratorNet:
    """Weights (out, in) and biases of the four FC layers."""
    n_devices: int
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (self.weights[0].shape[1], *(w.shape[0] for w in self.weights))

    @property
    def latent_size(self) -> int:
        return self.weights[0].shape[1]

    def parameters(self) -> List[np.ndarray]:
        """Parameters in a fixed order: W1, b1, W2, b2, ..."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def bind(self, tape: Tape) -> List[Variable]:
        """Register every parameter on a tape, in `parameters()` order."""
        return [tape.parameter(p) for p in self.parameters()]

    def copy(self) -> "GeneratorNet":
        return GeneratorNet(self.n_devices, [w.copy() for w in self.weights],
                            [b.copy() for b in self.biases])


def init_net(n_devices: int, seed: int) -> GeneratorNet:
    """
    Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)) and zero biases.

    Args:
        n_devices: Number of devices N_d
        seed: RNG seed

    Returns:
        GeneratorNet
    """
    sizes = layer_sizes(n_devices)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return GeneratorNet(n_devices, weights, biases)


def forward(net: GeneratorNet, z: Sequence[float], tape: Optional[Tape] = None,
            params: Optional[List[Variable]] = None) -> SoftAdjacency:
    """
    Map a latent vector to a soft adjacency on the tape.

    Args:
        net: Generator parameters
        z: Latent vector of length s_0
        tape: Tape to record on (a new one if omitted)
        params: Variables from `net.bind(tape)`; bound here when omitted

    Returns:
        SoftAdjacency whose `variable` is differentiable w.r.t. `params`
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (net.latent_size,):
        raise ValueError(f"Latent vector must have length {net.latent_size}, got {z.shape}")
    if params is None:
        tape = tape if tape is not None else Tape()
        params = net.bind(tape)
    tape = params[0].tape

    x = tape.constant(z)
    for layer in range(N_LAYERS):
        w, b = params[2 * layer], params[2 * layer + 1]
        x = ad.matvec(w, x) + b
        if layer < N_LAYERS - 1:
            x = ad.relu(x)

    n = net.n_devices
    logits = ad.reshape(x, (n, n + 1))  # row i holds x[(N_d+1) i : (N_d+1)(i+1)]
    soft = ad.row_softmax(logits)
    return SoftAdjacency(soft.value, soft)


def post_process(soft: Union[SoftAdjacency, np.ndarray]) -> Topology:
    """Harden each row to its argmax column (lowest column on ties)."""
    matrix = soft.matrix if isinstance(soft, SoftAdjacency) else np.asarray(soft, dtype=float)
    return Topology.from_parents(np.argmax(matrix, axis=1), matrix.shape[0])


@dataclass(frozen=True)
class AdamConfig:
    """ADAM hyper-parameters."""
    learning_rate: float = DEFAULT_LEARNING_RATE  # kappa
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_ADAM_EPSILON

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(eq=False)
class AdamState:
    """Per-parameter moments and the timestep."""
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_update(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
                config: AdamConfig, state: AdamState) -> None:
    """Apply one ADAM step to `params` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("Gradients, parameters and moments are not aligned")
    b1, b2 = config.beta1, config.beta2
    t = state.step + 1
    for theta, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != theta.shape:
            raise ValueError(f"Gradient shape {g.shape} does not match parameter {theta.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        theta -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    state.step = t


def adam_step(net: GeneratorNet, grads: Sequence[np.ndarray], config: AdamConfig,
              state: AdamState) -> GeneratorNet:
    """Update the generator's parameters (in `parameters()` order) and return it."""
    adam_update(net.parameters(), grads, config, state)
    return net


def save_checkpoint(path: Union[str, Path], net: GeneratorNet, state: AdamState, epoch: int) -> Path:
    """Write layer sizes, parameters, ADAM moments and the epoch counter to a .npz archive."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {
        'version': np.array(CHECKPOINT_FORMAT_VERSION),
        'n_devices': np.array(net.n_devices),
        'sizes': np.array(net.sizes),
        'adam_step': np.array(state.step),
        'epoch': np.array(epoch),
    }
    for k, (p, m, v) in enumerate(zip(net.parameters(), state.m, state.v)):
        arrays[f'param_{k}'] = p
        arrays[f'm_{k}'] = m
        arrays[f'v_{k}'] = v
    with open(path, 'wb') as f:
        np.savez(f, **arrays)
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[GeneratorNet, AdamState, int]:
    """Read a checkpoint written by save_checkpoint."""
    with np.load(Path(path)) as data:
        try:
            version = int(data['version'])
            if version != CHECKPOINT_FORMAT_VERSION:
                raise CheckpointFormatError(f"Unsupported checkpoint version {version}")
            n_devices = int(data['n_devices'])
            count = 2 * N_LAYERS
            params = [data[f'param_{k}'].copy() for k in range(count)]
            m = [data[f'm_{k}'].copy() for k in range(count)]
            v = [data[f'v_{k}'].copy() for k in range(count)]
            step, epoch = int(data['adam_step']), int(data['epoch'])
            sizes = tuple(int(s) for s in data['sizes'])
        except KeyError as e:
            raise CheckpointFormatError(f"Checkpoint is missing {e}") from e

    net = GeneratorNet(n_devices, params[0::2], params[1::2])
    if net.sizes != sizes:
        raise CheckpointFormatError(f"Layer sizes {net.sizes} disagree with header {sizes}")
    return net, AdamState(m, v, step), epoch
