"""
Experiment Harness

Scheme dispatch and Cartesian sweeps over N_d, N_b and beacon power. Each cell
draws one instance from a derived seed and runs every configured scheme on it;
rows are written to a CSV file in deterministic cell order.
"""

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from config.settings import (
    DEFAULT_BASE_SEED,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_SEEDS_PER_CELL,
    DEFAULT_WORKERS,
    OPTIMAL_MAX_DEVICES,
    SCHEMES,
)
from src.network.system_model import (
    NetworkInstance,
    SystemParams,
    Topology,
    generate_instance,
    validate_topology,
)
from src.allocation.ib_allocator import IbConfig, SlotAllocation, allocate
from src.topology.baselines import direct_topology, greedy_topology, mst_topology, optimal_topology
from src.evaluation.packet_tracing import PtConfig
from src.generator.network import AdamConfig
from src.generator.trainer import TrainConfig, propose_topology

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    'scheme', 'n_devices', 'n_beacons', 'pb_power', 'seed',
    'min_bits_per_hz', 'max_bits_per_hz', 'wall_time_seconds',
    'epochs', 'valid', 'fallback', 'error',
]


@dataclass(frozen=True, eq=False)
class SchemeResult:
    """Topology and balanced slots produced by one scheme on one instance."""
    scheme: str
    topology: Topology
    slots: SlotAllocation
    b_ib: float
    b_max: float
    epochs: int = 0
    fallback: bool = False
    budgets: Optional[np.ndarray] = None  # B_i per device


def solve_scheme(scheme: str, instance: NetworkInstance, seed: int = 0,
                 ib_config: Optional[IbConfig] = None,
                 pt_config: Optional[PtConfig] = None,
                 train_config: Optional[TrainConfig] = None,
                 adam_config: Optional[AdamConfig] = None,
                 n_jobs: int = 1) -> SchemeResult:
    """
    Build a topology with the named scheme and balance its slots.

    Args:
        scheme: One of "direct", "mst", "greedy", "opt", "proposed"
        instance: Network instance
        seed: Seeds the greedy visiting order and the generator (net and latent stream)
        ib_config: Allocator tolerances
        pt_config: Evaluator settings (proposed only)
        train_config: Training settings (proposed only); its seeds are replaced by `seed`
        adam_config: Optimizer settings (proposed only)
        n_jobs: Workers for exhaustive search (opt only)

    Returns:
        SchemeResult
    """
    if scheme not in SCHEMES:
        raise ValueError(f"Unknown scheme {scheme!r}; expected one of {SCHEMES}")

    if scheme == 'proposed':
        train_config = dataclasses.replace(train_config or TrainConfig(),
                                           net_seed=seed, latent_seed=seed + 1)
        proposal = propose_topology(instance, train_config, pt_config, adam_config, ib_config)
        return SchemeResult(scheme, proposal.topology, proposal.slots, proposal.b_ib,
                            proposal.b_max, epochs=proposal.epochs,
                            fallback=proposal.fallback, budgets=proposal.budgets)

    if scheme == 'direct':
        topology = direct_topology(instance.n_devices)
    elif scheme == 'mst':
        topology = mst_topology(instance)
    elif scheme == 'greedy':
        topology = greedy_topology(instance, seed)
    else:
        topology = optimal_topology(instance, ib_config, n_jobs=n_jobs).topology

    result = allocate(instance, topology, ib_config)
    return SchemeResult(scheme, topology, result.slots, result.b_ib, result.b_max,
                        budgets=result.budgets)


def derive_cell_seed(base_seed: int, n_devices: int, n_beacons: int, pb_power: float,
                     replicate: int) -> int:
    """Stable 32-bit seed for one replicate of one sweep cell."""
    key_string = f"{base_seed}|{n_devices}|{n_beacons}|{float(pb_power)!r}|{replicate}"
    return int(hashlib.sha256(key_string.encode()).hexdigest()[:8], 16)


def _build(cls, values: Optional[Dict[str, Any]], label: str):
    values = dict(values or {})
    unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
        raise ValueError(f"Unknown {label} fields: {sorted(unknown)}")
    if 'snapshot_epochs' in values:
        values['snapshot_epochs'] = tuple(values['snapshot_epochs'])
    return cls(**values)


@dataclass
class ExperimentConfig:
    """One sweep: schemes x N_d x N_b x P_b x replicates."""
    schemes: List[str] = field(default_factory=lambda: ['direct', 'mst', 'greedy', 'proposed'])
    n_devices: List[int] = field(default_factory=lambda: [5])
    n_beacons: List[int] = field(default_factory=lambda: [2])
    pb_power: List[float] = field(default_factory=lambda: [1.0])
    seeds_per_cell: int = DEFAULT_SEEDS_PER_CELL
    base_seed: int = DEFAULT_BASE_SEED
    system: SystemParams = field(default_factory=SystemParams)
    ib: IbConfig = field(default_factory=IbConfig)
    pt: PtConfig = field(default_factory=PtConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    adam: AdamConfig = field(default_factory=AdamConfig)
    output_dir: str = DEFAULT_OUTPUT_DIR
    results_file: str = "results.csv"
    workers: int = DEFAULT_WORKERS

    def __post_init__(self):
        for name in ('schemes', 'n_devices', 'n_beacons', 'pb_power'):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ValueError(f"Unknown schemes {unknown}; expected a subset of {SCHEMES}")
        if self.seeds_per_cell < 1:
            raise ValueError(f"seeds_per_cell must be at least 1, got {self.seeds_per_cell}")
        if 'opt' in self.schemes and max(self.n_devices) > OPTIMAL_MAX_DEVICES:
            raise ValueError(f"The opt scheme needs N_d <= {OPTIMAL_MAX_DEVICES}, "
                             f"got {max(self.n_devices)}")

    @property
    def results_path(self) -> Path:
        return Path(self.output_dir) / self.results_file

    def cells(self) -> List[tuple]:
        """(N_d, N_b, P_b, replicate) in sweep order."""
        return [(n_d, n_b, p_b, rep)
                for n_d in self.n_devices
                for n_b in self.n_beacons
                for p_b in self.pb_power
                for rep in range(self.seeds_per_cell)]

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ExperimentConfig":
        values = dict(values)
        unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"Unknown experiment config keys: {sorted(unknown)}")
        system = values.pop('system', None)
        values['system'] = SystemParams.from_dict(system or {})
        for key, sub_cls in (('ib', IbConfig), ('pt', PtConfig), ('train', TrainConfig),
                             ('adam', AdamConfig)):
            values[key] = _build(sub_cls, values.get(key), key)
        return cls(**values)

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "ExperimentConfig":
        with open(path, 'r') as f:
            return cls.from_dict(json.load(f))


@dataclass
class ResultRow:
    """One (scheme, cell, replicate) measurement."""
    scheme: str
    n_devices: int
    n_beacons: int
    pb_power: float
    seed: int
    min_bits_per_hz: float = float('nan')
    max_bits_per_hz: float = float('nan')
    wall_time_seconds: float = 0.0
    epochs: int = 0
    valid: bool = True
    fallback: bool = False
    error: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def _run_cell(config: ExperimentConfig, n_d: int, n_b: int, p_b: float,
              replicate: int) -> List[ResultRow]:
    seed = derive_cell_seed(config.base_seed, n_d, n_b, p_b, replicate)
    base = dict(n_devices=n_d, n_beacons=n_b, pb_power=float(p_b), seed=seed)
    try:
        instance = generate_instance(seed, n_d, n_b, config.system.replace(pb_power=float(p_b)))
    except Exception as e:
        logger.warning("Cell N_d=%d N_b=%d P_b=%g seed=%d failed: %s", n_d, n_b, p_b, seed, e)
        return [ResultRow(scheme=s, valid=False, error=str(e), **base) for s in config.schemes]

    rows = []
    for scheme in config.schemes:
        start = time.perf_counter()
        try:
            result = solve_scheme(scheme, instance, seed, config.ib, config.pt,
                                  config.train, config.adam)
        except Exception as e:
            logger.warning("Scheme %s failed on N_d=%d N_b=%d P_b=%g seed=%d: %s",
                           scheme, n_d, n_b, p_b, seed, e)
            rows.append(ResultRow(scheme=scheme, valid=False, error=f"{type(e).__name__}: {e}",
                                  wall_time_seconds=time.perf_counter() - start, **base))
            continue
        rows.append(ResultRow(
            scheme=scheme,
            min_bits_per_hz=result.b_ib,
            max_bits_per_hz=result.b_max,
            wall_time_seconds=time.perf_counter() - start,
            epochs=result.epochs,
            valid=validate_topology(result.topology),
            fallback=result.fallback,
            **base,
        ))
    return rows


def rows_to_frame(rows: Sequence[ResultRow]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in rows], columns=RESULT_COLUMNS)


def run_experiment(config: ExperimentConfig, n_jobs: Optional[int] = None,
                   progress: bool = False) -> pd.DataFrame:
    """
    Run a full sweep and write the result CSV.

    Args:
        config: Sweep description
        n_jobs: joblib workers (defaults to config.workers)
        progress: Show a tqdm bar over cells

    Returns:
        DataFrame with one row per (scheme, cell, replicate)
    """
    n_jobs = n_jobs or config.workers
    cells = config.cells()
    logger.info("Running %d cell(s) x %d scheme(s) with %d worker(s)",
                len(cells), len(config.schemes), n_jobs)

    tasks = (delayed(_run_cell)(config, *cell) for cell in cells)
    if progress:
        tasks = tqdm(tasks, total=len(cells), desc="Cells", unit="cell")
    per_cell = Parallel(n_jobs=n_jobs)(tasks)

    rows = [row for cell_rows in per_cell for row in cell_rows]
    frame = rows_to_frame(rows)

    path = config.results_path
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    failed = int((frame['error'] != "").sum())
    logger.info("Wrote %d row(s) to %s (%d failed)", len(frame), path, failed)
    return frame


def read_results(path: Union[str, Path]) -> List[ResultRow]:
    """Parse a result CSV back into ResultRow objects."""
    frame = pd.read_csv(path, keep_default_na=False, na_values={
        'min_bits_per_hz': ['nan', 'NaN', ''], 'max_bits_per_hz': ['nan', 'NaN', ''],
    })
    missing = set(RESULT_COLUMNS) - set(frame.columns)
    if missing:
        raise ValueError(f"Result file {path} is missing columns {sorted(missing)}")

    rows = []
    for record in frame[RESULT_COLUMNS].to_dict('records'):
        rows.append(ResultRow(
            scheme=str(record['scheme']),
            n_devices=int(record['n_devices']),
            n_beacons=int(record['n_beacons']),
            pb_power=float(record['pb_power']),
            seed=int(record['seed']),
            min_bits_per_hz=float(record['min_bits_per_hz']),
            max_bits_per_hz=float(record['max_bits_per_hz']),
            wall_time_seconds=float(record['wall_time_seconds']),
            epochs=int(record['epochs']),
            valid=_as_bool(record['valid']),
            fallback=_as_bool(record['fallback']),
            error=str(record['error']),
        ))
    return rows


def _as_bool(value) -> bool:
    if isinstance(value, str):
        return value.strip().lower() == 'true'
    return bool(value)
