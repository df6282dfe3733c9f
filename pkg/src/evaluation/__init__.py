"""Packet-tracing evaluation package."""

from .packet_tracing import (
    PtConfig,
    RateAssessment,
    packet_trace,
    pt_link_rates,
    rate_pt,
    training_loss,
)

__all__ = ['PtConfig', 'RateAssessment', 'packet_trace', 'pt_link_rates', 'rate_pt', 'training_loss']
