"""
Analysis Tools

Aggregation of benchmark result rows: per-cell statistics of min bits/Hz and
wall time, and a scheme ordering report against the baselines.
"""

from typing import List, Sequence, Union

import numpy as np
import pandas as pd

BASELINES = ('direct', 'mst', 'greedy')
CELL_KEYS = ['n_devices', 'n_beacons', 'pb_power']


class PerformanceAnalyzer:
    """Analyze benchmark results."""

    def __init__(self, results: Union[pd.DataFrame, Sequence]):
        """
        Initialize the performance analyzer.

        Args:
            results: Result DataFrame, or a sequence of ResultRow objects
        """
        if isinstance(results, pd.DataFrame):
            frame = results.copy()
        else:
            frame = pd.DataFrame([r.to_dict() for r in results])
        if frame.empty:
            raise ValueError("No result rows to analyze")
        self.results = frame
        self.ok = frame[frame['error'].fillna("") == ""]

    def summarize(self) -> pd.DataFrame:
        """
        Mean and standard deviation of min bits/Hz and wall time per (scheme, cell).

        Returns:
            DataFrame indexed by (scheme, N_d, N_b, P_b)
        """
        grouped = self.ok.groupby(['scheme'] + CELL_KEYS)
        summary = grouped.agg(
            runs=('min_bits_per_hz', 'size'),
            mean_min_bits=('min_bits_per_hz', 'mean'),
            std_min_bits=('min_bits_per_hz', 'std'),
            mean_wall_time=('wall_time_seconds', 'mean'),
            fallbacks=('fallback', 'sum'),
        )
        failed = self.results.groupby(['scheme'] + CELL_KEYS)['error'].apply(
            lambda e: int((e.fillna("") != "").sum()))
        summary['failed'] = failed.reindex(summary.index).fillna(0).astype(int)
        return summary

    def cell_means(self) -> pd.DataFrame:
        """Mean min bits/Hz with one column per scheme and one row per cell."""
        return self.ok.pivot_table(index=CELL_KEYS, columns='scheme',
                                   values='min_bits_per_hz', aggfunc='mean')

    def ordering_report(self, scheme: str = 'proposed') -> pd.DataFrame:
        """
        Compare a scheme with the baselines and with exhaustive search per cell.

        Columns: best_baseline (mean of the strongest baseline), beats_baselines,
        ratio_to_opt (NaN when opt was not run) and majority_wins, the share of
        replicates where `scheme` is at least every baseline.
        """
        means = self.cell_means()
        if scheme not in means.columns:
            return pd.DataFrame()

        baselines = [b for b in BASELINES if b in means.columns and b != scheme]
        report = pd.DataFrame(index=means.index)
        report[scheme] = means[scheme]
        if baselines:
            report['best_baseline'] = means[baselines].max(axis=1)
            report['beats_baselines'] = means[scheme] >= report['best_baseline']
            report['majority_wins'] = self._win_share(scheme, baselines)
        report['ratio_to_opt'] = means[scheme] / means['opt'] if 'opt' in means.columns else np.nan
        return report

    def _win_share(self, scheme: str, baselines: List[str]) -> pd.Series:
        wide = self.ok.pivot_table(index=CELL_KEYS + ['seed'], columns='scheme',
                                   values='min_bits_per_hz', aggfunc='first')
        wins = wide[scheme].ge(wide[baselines].max(axis=1))
        return wins.groupby(level=CELL_KEYS).mean()

    def timing_table(self) -> pd.DataFrame:
        """Mean wall time per scheme (columns) and N_d (rows)."""
        return self.ok.pivot_table(index='n_devices', columns='scheme',
                                   values='wall_time_seconds', aggfunc='mean')
