"""Analysis tools package."""

from .performance import PerformanceAnalyzer

__all__ = ['PerformanceAnalyzer']