"""Experiment harness, exporters and command line package."""

from .experiment import (
    RESULT_COLUMNS,
    SchemeResult,
    ExperimentConfig,
    ResultRow,
    solve_scheme,
    derive_cell_seed,
    run_experiment,
    rows_to_frame,
    read_results,
)
from .export import (
    export_topology_dot,
    export_soft_adjacency_dot,
    training_curves,
    emit_training_curves,
    slots_frame,
    write_slots_csv,
)

__all__ = [
    'RESULT_COLUMNS', 'SchemeResult', 'ExperimentConfig', 'ResultRow', 'solve_scheme',
    'derive_cell_seed', 'run_experiment', 'rows_to_frame', 'read_results',
    'export_topology_dot', 'export_soft_adjacency_dot', 'training_curves',
    'emit_training_curves', 'slots_frame', 'write_slots_csv',
]
