"""
Relay Topology Planner

Relay topology and TDMA slot planning for energy-harvesting IoT networks: system
model, iterative-balancing slot allocation, baseline topologies, a packet-tracing
rate evaluator on a reverse-mode tape and a trained topology generator.
"""

__version__ = "0.1.0"
__author__ = "Relay Planner Developer"

from src.network.system_model import NetworkInstance, Topology, generate_instance
from src.allocation.ib_allocator import allocate
from src.generator.trainer import propose_topology

__all__ = [
    'NetworkInstance',
    'Topology',
    'generate_instance',
    'allocate',
    'propose_topology'
]
