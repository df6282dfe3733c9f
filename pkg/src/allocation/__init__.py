"""TDMA slot allocation package."""

from .ib_allocator import (
    IbConfig,
    SlotAllocation,
    IbResult,
    IbNonConvergenceError,
    IbPremiseWarning,
    allocate,
    b_ib,
    bits_per_hz_for_parents,
)

__all__ = [
    'IbConfig', 'SlotAllocation', 'IbResult', 'IbNonConvergenceError', 'IbPremiseWarning',
    'allocate', 'b_ib', 'bits_per_hz_for_parents',
]
