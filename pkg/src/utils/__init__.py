"""Utility functions package."""

from .helpers import (
    format_percentage,
    format_bits,
    format_seconds,
    generate_report_summary
)

__all__ = [
    'format_percentage',
    'format_bits',
    'format_seconds',
    'generate_report_summary'
]
