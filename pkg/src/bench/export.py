"""
Topology and Training Exporters

Graphviz DOT text for hard and soft adjacencies, and CSV tables for training
curves and slot allocations.
"""

from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.network.system_model import NetworkInstance, Topology, link_rates
from src.allocation.ib_allocator import SlotAllocation
from src.generator.network import SoftAdjacency
from src.generator.trainer import TrainResult


def _node_lines(instance: NetworkInstance, shares: Optional[np.ndarray]) -> List[str]:
    lines = []
    sink_x, sink_y = instance.sink_position
    lines.append(f'  sink [shape=doublecircle, label="sink", pos="{sink_x:.3f},{sink_y:.3f}!"];')
    for i, (x, y) in enumerate(instance.device_positions):
        label = f"d{i}"
        if shares is not None:
            label += f"\\nslot {shares[i]:.4f}"
        lines.append(f'  d{i} [shape=circle, label="{label}", pos="{x:.3f},{y:.3f}!"];')
    return lines


def _node_name(index: int, n_devices: int) -> str:
    return "sink" if index == n_devices else f"d{index}"


def export_topology_dot(instance: NetworkInstance, topology: Topology,
                        slots: Optional[SlotAllocation] = None) -> str:
    """
    DOT description of a hard topology.

    Nodes carry their positions and (when `slots` is given) their slot share; edges
    carry the link rate t_i log2(1 + Gamma) in bit*s/Hz at the given slots, or at
    uniform slots otherwise.
    """
    n = instance.n_devices
    if slots is None:
        slots = SlotAllocation.uniform(n, instance.params.frame_T)
    rates = link_rates(instance, slots.slots)

    lines = ["digraph relay {"]
    lines.extend(_node_lines(instance, slots.shares))
    for i in range(n):
        for j in np.flatnonzero(topology.adjacency[i]):
            lines.append(f'  d{i} -> {_node_name(int(j), n)} [label="{rates[i, j]:.6g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_soft_adjacency_dot(instance: NetworkInstance, soft: Union[SoftAdjacency, np.ndarray],
                              min_weight: float = 0.05) -> str:
    """DOT description of a raw adjacency; edges below `min_weight` are omitted."""
    matrix = soft.matrix if isinstance(soft, SoftAdjacency) else np.asarray(soft, dtype=float)
    n = instance.n_devices
    lines = ["digraph relay_soft {"]
    lines.extend(_node_lines(instance, None))
    for i in range(n):
        for j in range(n + 1):
            w = matrix[i, j]
            if j != i and w >= min_weight:
                lines.append(f'  d{i} -> {_node_name(j, n)} [label="{w:.3f}", penwidth={1 + 4 * w:.3f}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def training_curves(history: TrainResult) -> pd.DataFrame:
    """Per-epoch loss, running minimum loss and champion B_min."""
    if not history.losses:
        raise ValueError("Training history is empty")
    epochs = len(history.losses)
    b_min = list(history.b_min) + [float('nan')] * (epochs - len(history.b_min))
    return pd.DataFrame({
        'epoch': np.arange(epochs),
        'loss': history.losses,
        'running_min_loss': history.running_min_loss,
        'b_min': b_min,
    })


def emit_training_curves(history: TrainResult, path: Union[str, Path]) -> Path:
    """Write the training curves CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    training_curves(history).to_csv(path, index=False)
    return path


def slots_frame(slots: SlotAllocation, budgets: Optional[Sequence[float]] = None) -> pd.DataFrame:
    frame = pd.DataFrame({
        'device': np.arange(len(slots)),
        'slot_seconds': slots.slots,
        'share': slots.shares,
    })
    if budgets is not None:
        frame['bits_per_hz'] = np.asarray(budgets, dtype=float)
    return frame


def write_slots_csv(slots: SlotAllocation, path: Union[str, Path],
                    budgets: Optional[Sequence[float]] = None) -> Path:
    """Write per-device slot lengths and shares."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    slots_frame(slots, budgets).to_csv(path, index=False)
    return path
