"""
Relay Network System Model

Energy-harvesting IoT network instances: node placement, block-fading channels,
harvested energy, per-link SNR and the per-device bits/Hz budget of a relay topology.
"""

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist

from config.settings import (
    DEFAULT_PATHLOSS_EXPONENT,
    DEFAULT_BANDWIDTH_HZ,
    DEFAULT_NOISE_FIGURE_DB,
    DEFAULT_PB_POWER_W,
    DEFAULT_CONVERSION_EFFICIENCY,
    DEFAULT_FRAME_T,
    DEFAULT_RADIUS_R,
    DEFAULT_MIN_DISTANCE,
    DEFAULT_REFERENCE_DISTANCE,
    THERMAL_NOISE_DBM_PER_HZ,
)


def dbm_to_watts(dbm: float) -> float:
    """Convert a power level in dBm to watts."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemParams:
    """Physical-layer parameters shared by every node of an instance."""
    pathloss_exponent: float = DEFAULT_PATHLOSS_EXPONENT  # alpha
    bandwidth: float = DEFAULT_BANDWIDTH_HZ  # Hz
    noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB  # dB
    pb_power: float = DEFAULT_PB_POWER_W  # W, per power beacon
    conversion_efficiency: float = DEFAULT_CONVERSION_EFFICIENCY  # eta
    frame_T: float = DEFAULT_FRAME_T  # seconds
    radius_R: float = DEFAULT_RADIUS_R  # meters
    min_distance_clamp: float = DEFAULT_MIN_DISTANCE  # meters
    reference_distance: float = DEFAULT_REFERENCE_DISTANCE  # meters, d0 of the path-loss law

    def __post_init__(self):
        if self.pathloss_exponent <= 0:
            raise ValueError(f"pathloss_exponent must be positive, got {self.pathloss_exponent}")
        if not 0.0 <= self.conversion_efficiency <= 1.0:
            raise ValueError(f"conversion_efficiency must lie in [0, 1], got {self.conversion_efficiency}")
        if self.frame_T <= 0:
            raise ValueError(f"frame_T must be positive, got {self.frame_T}")
        if self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.radius_R <= 0:
            raise ValueError(f"radius_R must be positive, got {self.radius_R}")
        if self.min_distance_clamp <= 0:
            raise ValueError(f"min_distance_clamp must be positive, got {self.min_distance_clamp}")
        if self.reference_distance <= 0:
            raise ValueError(f"reference_distance must be positive, got {self.reference_distance}")
        if self.pb_power < 0:
            raise ValueError(f"pb_power must be non-negative, got {self.pb_power}")

    @property
    def noise_power(self) -> float:
        """Receiver noise power N in watts: -174 + NF + 10 log10(BW) dBm."""
        noise_dbm = THERMAL_NOISE_DBM_PER_HZ + self.noise_figure_db + 10.0 * np.log10(self.bandwidth)
        return dbm_to_watts(noise_dbm)

    def replace(self, **changes) -> "SystemParams":
        """Return a copy with some fields overridden."""
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, float]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, float]) -> "SystemParams":
        unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"Unknown SystemParams fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in values.items()})


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """
    One sampled network: N_d devices and N_b power beacons around a sink at the origin.

    Node index convention: devices are 0..N_d-1 and the sink is N_d.
    `link_fading[k, n]` is |h_{k,n}|^2 from device k to node n; `beacon_fading[i, n]`
    is |h_{i,n}|^2 from beacon i to device n.
    """
    n_devices: int
    n_beacons: int
    device_positions: np.ndarray
    beacon_positions: np.ndarray
    link_fading: np.ndarray
    beacon_fading: np.ndarray
    params: SystemParams = field(default_factory=SystemParams)
    seed: Optional[int] = None
    sink_position: np.ndarray = field(default_factory=lambda: np.zeros(2))
    harvested: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_devices < 1:
            raise ValueError(f"n_devices must be at least 1, got {self.n_devices}")
        if self.n_beacons < 0:
            raise ValueError(f"n_beacons must be non-negative, got {self.n_beacons}")

        nd, nb = self.n_devices, self.n_beacons
        arrays = {
            'device_positions': (self.device_positions, (nd, 2)),
            'beacon_positions': (np.reshape(self.beacon_positions, (nb, 2)), (nb, 2)),
            'link_fading': (self.link_fading, (nd, nd + 1)),
            'beacon_fading': (np.reshape(self.beacon_fading, (nb, nd)), (nb, nd)),
            'sink_position': (self.sink_position, (2,)),
        }
        for name, (value, shape) in arrays.items():
            value = _readonly(value)
            if value.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {value.shape}")
            object.__setattr__(self, name, value)

        if np.any(self.link_fading <= 0) or np.any(self.beacon_fading <= 0):
            raise ValueError("All channel gains |h|^2 must be positive")

        radius = self.params.radius_R * (1 + 1e-12)
        for name in ('device_positions', 'beacon_positions'):
            dist = np.linalg.norm(getattr(self, name) - self.sink_position, axis=1)
            if np.any(dist > radius):
                raise ValueError(f"{name} contains a point outside the coverage radius R")

        object.__setattr__(self, 'harvested', _readonly(harvested_energy(self)))

    @property
    def node_positions(self) -> np.ndarray:
        """Positions of all receiving nodes: devices followed by the sink."""
        return np.vstack([self.device_positions, self.sink_position[None, :]])

    @cached_property
    def distances(self) -> np.ndarray:
        """Clamped device-to-node distances, shape (N_d, N_d+1)."""
        d = cdist(self.device_positions, self.node_positions)
        return _readonly(np.maximum(d, self.params.min_distance_clamp))

    @cached_property
    def beacon_distances(self) -> np.ndarray:
        """Clamped beacon-to-device distances, shape (N_b, N_d)."""
        if self.n_beacons == 0:
            return _readonly(np.zeros((0, self.n_devices)))
        d = cdist(self.beacon_positions, self.device_positions)
        return _readonly(np.maximum(d, self.params.min_distance_clamp))

    def path_loss(self, distances: np.ndarray) -> np.ndarray:
        """(d / d0)^-alpha for clamped distances in meters."""
        return (distances / self.params.reference_distance) ** (-self.params.pathloss_exponent)

    def link_gain(self, include_fading: bool = True) -> np.ndarray:
        """
        Power gain |h|^2 (d / d0)^-alpha of every device-to-node link, shape (N_d, N_d+1).

        Self-links (k, k) have zero gain.
        """
        gain = self.path_loss(self.distances)
        if include_fading:
            gain = gain * self.link_fading
        gain = np.array(gain)
        np.fill_diagonal(gain[:, :self.n_devices], 0.0)
        return gain


@dataclass(frozen=True, eq=False)
class Topology:
    """
    Hard relay topology c: row k is one-hot over the N_d+1 nodes (column N_d is the sink).
    """
    adjacency: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.adjacency)
        if raw.ndim != 2 or raw.shape[1] != raw.shape[0] + 1:
            raise ValueError(f"Topology adjacency must be N_d x (N_d+1), got {raw.shape}")
        if not np.isin(raw, (0, 1)).all():
            raise ValueError("Topology entries must be 0 or 1")
        adjacency = raw.astype(np.int8)
        adjacency.setflags(write=False)
        object.__setattr__(self, 'adjacency', adjacency)

    @classmethod
    def from_parents(cls, parents: Sequence[int], n_devices: Optional[int] = None) -> "Topology":
        """Build a topology where device k transmits to node parents[k]."""
        parents = np.asarray(parents, dtype=int)
        n = len(parents) if n_devices is None else n_devices
        if len(parents) != n:
            raise ValueError(f"Expected {n} parents, got {len(parents)}")
        if np.any(parents < 0) or np.any(parents > n):
            raise ValueError("Parent indices must lie in [0, N_d]")
        adjacency = np.zeros((n, n + 1), dtype=np.int8)
        adjacency[np.arange(n), parents] = 1
        return cls(adjacency)

    @property
    def n_devices(self) -> int:
        return self.adjacency.shape[0]

    @property
    def sink(self) -> int:
        return self.n_devices

    def is_one_hot(self) -> bool:
        return bool(np.all(self.adjacency.sum(axis=1) == 1))

    @property
    def parents(self) -> np.ndarray:
        """Parent node of each device; requires one-hot rows."""
        if not self.is_one_hot():
            raise ValueError("Topology rows must be one-hot to define parents")
        return np.argmax(self.adjacency, axis=1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Topology):
            return NotImplemented
        return np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self) -> int:
        return hash((self.adjacency.shape, self.adjacency.tobytes()))

    def __repr__(self) -> str:
        if self.is_one_hot():
            return f"Topology(parents={self.parents.tolist()})"
        return f"Topology(adjacency={self.adjacency.tolist()})"


def _sample_disk(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    """Uniform points in a disk (radius drawn as R*sqrt(u))."""
    r = radius * np.sqrt(rng.random(count))
    theta = 2.0 * np.pi * rng.random(count)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def generate_instance(seed: int, n_devices: int, n_beacons: int,
                      params: Optional[SystemParams] = None) -> NetworkInstance:
    """
    Sample a network instance.

    Devices and beacons are uniform over the coverage disk; all |h|^2 are
    exponential with unit mean. The draw order is fixed so the same seed
    reproduces the instance bit-exactly.

    Args:
        seed: RNG seed
        n_devices: Number of IoT devices N_d (>= 1)
        n_beacons: Number of power beacons N_b (>= 0)
        params: Physical parameters (defaults from config.settings)

    Returns:
        NetworkInstance
    """
    if int(n_devices) != n_devices or n_devices < 1:
        raise ValueError(f"n_devices must be a positive integer, got {n_devices}")
    if int(n_beacons) != n_beacons or n_beacons < 0:
        raise ValueError(f"n_beacons must be a non-negative integer, got {n_beacons}")
    params = params or SystemParams()
    n_devices, n_beacons = int(n_devices), int(n_beacons)

    rng = np.random.default_rng(seed)
    device_positions = _sample_disk(rng, n_devices, params.radius_R)
    beacon_positions = _sample_disk(rng, n_beacons, params.radius_R)
    link_fading = rng.exponential(1.0, size=(n_devices, n_devices + 1))
    beacon_fading = rng.exponential(1.0, size=(n_beacons, n_devices))

    return NetworkInstance(
        n_devices=n_devices,
        n_beacons=n_beacons,
        device_positions=device_positions,
        beacon_positions=beacon_positions,
        link_fading=link_fading,
        beacon_fading=beacon_fading,
        params=params,
        seed=seed,
    )


def harvested_energy(instance: NetworkInstance) -> np.ndarray:
    """
    Energy harvested by each device over one frame (linear EH model).

    E_n = eta * T * sum_i P_b |h_{i,n}|^2 (d_{i,n} / d0)^-alpha

    Returns:
        Vector of joules, length N_d
    """
    p = instance.params
    if instance.n_beacons == 0:
        return np.zeros(instance.n_devices)
    received = p.pb_power * instance.beacon_fading * instance.path_loss(instance.beacon_distances)
    return p.conversion_efficiency * p.frame_T * received.sum(axis=0)


def snr(instance: NetworkInstance, src: int, dst: int, slot_t: float) -> float:
    """
    SNR of device `src` transmitting to node `dst` (N_d is the sink) in a slot of length slot_t.

    Gamma = (E_src / t) |h|^2 (d / d0)^-alpha / N
    """
    if slot_t <= 0:
        raise ValueError(f"slot_t must be positive, got {slot_t}")
    if not 0 <= src < instance.n_devices or not 0 <= dst <= instance.n_devices:
        raise ValueError(f"Invalid link ({src}, {dst})")
    gain = instance.link_gain(include_fading=True)[src, dst]
    return float(instance.harvested[src] / slot_t * gain / instance.params.noise_power)


SlotsLike = Union[np.ndarray, Sequence[float], "SlotAllocation"]  # noqa: F821


def _slot_vector(slots: SlotsLike, n_devices: int) -> np.ndarray:
    t = np.asarray(getattr(slots, 'slots', slots), dtype=float)
    if t.shape != (n_devices,):
        raise ValueError(f"Expected {n_devices} slots, got shape {t.shape}")
    if np.any(t <= 0):
        raise ValueError("All slots must be positive")
    return t


def snr_matrix(instance: NetworkInstance, slots: SlotsLike, include_fading: bool = True) -> np.ndarray:
    """SNR of every device-to-node link when device k transmits during slots[k]."""
    t = _slot_vector(slots, instance.n_devices)
    power = instance.harvested / t
    return power[:, None] * instance.link_gain(include_fading) / instance.params.noise_power


def link_rates(instance: NetworkInstance, slots: SlotsLike, include_fading: bool = True) -> np.ndarray:
    """t_k log2(1 + Gamma_{k,n}) for every device-to-node link, shape (N_d, N_d+1)."""
    t = _slot_vector(slots, instance.n_devices)
    return t[:, None] * np.log2(1.0 + snr_matrix(instance, t, include_fading))


def bits_per_hz(instance: NetworkInstance, topology: Topology, slots: SlotsLike) -> np.ndarray:
    """
    Net bits/Hz budget B_k of every device: outbound capacity minus relayed inbound load.

    Returns:
        Vector of length N_d; entries may be negative for overloaded relays
    """
    if topology.n_devices != instance.n_devices:
        raise ValueError("Topology and instance disagree on N_d")
    carried = topology.adjacency * link_rates(instance, slots)
    outbound = carried.sum(axis=1)
    inbound = carried[:, :instance.n_devices].sum(axis=0)
    return outbound - inbound


def reaches_sink(parents: Sequence[int]) -> bool:
    """True if following parent pointers from every device ends at the sink within N_d hops."""
    parents = np.asarray(parents, dtype=int)
    n = len(parents)
    hop = np.append(parents, n)  # sink points at itself
    current = np.arange(n)
    for _ in range(n):
        current = hop[current]
    return bool(np.all(current == n))


def validate_topology(topology: Topology) -> bool:
    """
    Check constraints (one outward link per device, every device reaches the sink).

    Uses the extended adjacency matrix with a sink self-cycle: the topology is valid iff
    (C^{N_d})_{n, sink} = 1 for every device n.
    """
    if not topology.is_one_hot():
        return False
    n = topology.n_devices
    extended = np.zeros((n + 1, n + 1), dtype=np.int64)
    extended[:n, :] = topology.adjacency
    extended[n, n] = 1
    reach = np.linalg.matrix_power(extended, n)
    return bool(np.all(reach[:n, n] == 1))
