"""Formatting helpers for the relay planner."""

from typing import Any, Dict

import numpy as np


def format_percentage(value: float, decimals: int = 2) -> str:
    """
    Format a fraction as a percentage.

    Args:
        value: Fraction, e.g. a slot share
        decimals: Number of decimal places

    Returns:
        Formatted percentage string
    """
    return f"{value * 100:.{decimals}f}%"


def format_bits(value: float, digits: int = 6) -> str:
    """Format a bits/Hz budget (bit*s/Hz) with `digits` significant digits."""
    if value is None or np.isnan(value):
        return "n/a"
    return f"{value:.{digits}g} bit·s/Hz"


def format_seconds(value: float) -> str:
    """Human readable duration."""
    if value < 1e-3:
        return f"{value * 1e6:.0f} µs"
    if value < 1.0:
        return f"{value * 1e3:.1f} ms"
    if value < 120.0:
        return f"{value:.2f} s"
    return f"{value / 60.0:.1f} min"


def generate_report_summary(result: Dict[str, Any]) -> str:
    """
    Generate a summary report for one solved instance.

    Args:
        result: Mapping with 'scheme', 'parents', 'b_ib', 'b_max' and 'shares'
            (optionally 'epochs' and 'fallback')

    Returns:
        Formatted summary string
    """
    summary = f"Relay Plan Summary ({result['scheme']})\n"
    summary += "=" * 30 + "\n\n"

    summary += f"Parents: {list(result['parents'])}\n"
    summary += f"Min Bits/Hz: {format_bits(result['b_ib'])}\n"
    summary += f"Max Bits/Hz: {format_bits(result['b_max'])}\n"
    shares = ", ".join(format_percentage(s) for s in result['shares'])
    summary += f"Slot Shares: {shares}\n"
    if 'epochs' in result:
        summary += f"Training Epochs: {result['epochs']}\n"
    if result.get('fallback'):
        summary += "Fallback: direct topology (hardened topology did not reach the sink)\n"

    return summary
