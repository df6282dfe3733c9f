"""Network system model package."""

from .system_model import (
    SystemParams,
    NetworkInstance,
    Topology,
    generate_instance,
    harvested_energy,
    snr,
    snr_matrix,
    link_rates,
    bits_per_hz,
    validate_topology,
    reaches_sink,
)
from .instance_io import (
    InstanceFormatError,
    dumps_instance,
    loads_instance,
    write_instance,
    read_instance,
)

__all__ = [
    'SystemParams', 'NetworkInstance', 'Topology',
    'generate_instance', 'harvested_energy', 'snr', 'snr_matrix', 'link_rates',
    'bits_per_hz', 'validate_topology', 'reaches_sink',
    'InstanceFormatError', 'dumps_instance', 'loads_instance',
    'write_instance', 'read_instance',
]
