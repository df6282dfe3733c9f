"""
Relay Planner Command Line

Subcommands: generate, solve, train, bench and export-dot. Worker count and the
default output directory may come from the environment (RELAY_WORKERS,
RELAY_OUTPUT_DIR), optionally through a .env file.
"""

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from config.settings import (
    DEFAULT_BASE_SEED,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_WORKERS,
    ENV_OUTPUT_DIR,
    ENV_WORKERS,
    SCHEMES,
)
from src.network.system_model import SystemParams, generate_instance
from src.network.instance_io import read_instance, write_instance
from src.allocation.ib_allocator import IbConfig
from src.evaluation.packet_tracing import PtConfig
from src.generator.network import AdamConfig, load_checkpoint, save_checkpoint
from src.generator.trainer import GeneratorTrainer, TrainConfig
from src.analysis.performance import PerformanceAnalyzer
from src.utils.helpers import format_bits, format_seconds, generate_report_summary
from .experiment import ExperimentConfig, run_experiment, solve_scheme
from .export import (
    emit_training_curves,
    export_soft_adjacency_dot,
    export_topology_dot,
    write_slots_csv,
)

logger = logging.getLogger(__name__)


def _env_workers() -> int:
    value = os.getenv(ENV_WORKERS)
    if value is None:
        return DEFAULT_WORKERS
    try:
        workers = int(value)
    except ValueError:
        raise ValueError(f"{ENV_WORKERS} must be an integer, got {value!r}")
    if workers == 0:
        raise ValueError(f"{ENV_WORKERS} must not be 0")
    return workers


def _output_dir(args) -> Path:
    if getattr(args, 'output_dir', None):
        return Path(args.output_dir)
    return Path(os.getenv(ENV_OUTPUT_DIR, DEFAULT_OUTPUT_DIR))


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _ib_config(args) -> IbConfig:
    return IbConfig(eps1=args.eps1, eps2=args.eps2)


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(max_epochs=args.max_epochs, net_seed=seed, latent_seed=seed + 1,
                       progress=args.progress)


def cmd_generate(args) -> int:
    params = SystemParams(pb_power=args.pb_power)
    instance = generate_instance(args.seed, args.n_devices, args.n_beacons, params)
    path = write_instance(instance, args.output)
    print(f"📡 Instance N_d={args.n_devices}, N_b={args.n_beacons}, seed={args.seed} -> {path}")
    return 0


def cmd_solve(args) -> int:
    instance = read_instance(args.instance)
    result = solve_scheme(args.scheme, instance, args.seed, _ib_config(args),
                          PtConfig(budget_threshold=args.budget_threshold),
                          _train_config(args, args.seed), AdamConfig(learning_rate=args.learning_rate))

    summary = {
        "scheme": args.scheme,
        "parents": [int(p) for p in result.topology.parents],
        "b_ib": result.b_ib,
        "b_max": result.b_max,
        "shares": result.slots.shares,
    }
    if args.scheme == "proposed":
        summary.update(epochs=result.epochs, fallback=result.fallback)
    print(generate_report_summary(summary))

    out = _output_dir(args)
    stem = Path(args.instance).stem
    write_slots_csv(result.slots, out / f"{stem}_{args.scheme}_slots.csv", budgets=result.budgets)
    _write_text(out / f"{stem}_{args.scheme}.dot",
                export_topology_dot(instance, result.topology, result.slots))
    print(f"💾 Slots and DOT written to {out}")
    return 0


def cmd_train(args) -> int:
    instance = read_instance(args.instance)
    net = state = None
    if args.resume:
        net, state, epoch = load_checkpoint(args.resume)
        print(f"📂 Resuming generator trained for {epoch} epoch(s); histories restart at 0")

    trainer = GeneratorTrainer(instance, _train_config(args, args.seed),
                               PtConfig(budget_threshold=args.budget_threshold),
                               AdamConfig(learning_rate=args.learning_rate), _ib_config(args),
                               net=net, adam_state=state)
    history = trainer.train()
    if args.extra_epochs:
        history = trainer.continue_for(args.extra_epochs)

    out = _output_dir(args)
    stem = Path(args.instance).stem
    emit_training_curves(history, out / f"{stem}_training.csv")
    save_checkpoint(out / f"{stem}_generator.npz", trainer.net, trainer.adam_state, trainer.epoch)
    _write_text(out / f"{stem}_champion_soft.dot", export_soft_adjacency_dot(instance, history.champion))
    for epoch, topology in sorted(history.snapshots.items()):
        _write_text(out / f"{stem}_epoch{epoch}.dot", export_topology_dot(instance, topology))

    print(f"🧠 Trained {history.epochs} epoch(s); best loss {history.best_loss:.6f} at epoch {history.champion_epoch}")
    if history.b_min:
        print(f"   Champion min bits/Hz: {format_bits(history.b_min[-1])}")
    print(f"💾 Curves, checkpoint and DOT files written to {out}")
    return 0


def _apply_sweep_flags(config: ExperimentConfig, args) -> ExperimentConfig:
    sweep = {name: getattr(args, name)
             for name in ('schemes', 'n_devices', 'n_beacons', 'pb_power', 'base_seed')
             if getattr(args, name) is not None}
    if args.seeds is not None:
        sweep['seeds_per_cell'] = args.seeds
    ib = {k: getattr(args, k) for k in ('eps1', 'eps2') if getattr(args, k) is not None}
    if ib:
        sweep['ib'] = dataclasses.replace(config.ib, **ib)
    if args.max_epochs is not None:
        sweep['train'] = dataclasses.replace(config.train, max_epochs=args.max_epochs)
    if args.learning_rate is not None:
        sweep['adam'] = dataclasses.replace(config.adam, learning_rate=args.learning_rate)
    if args.budget_threshold is not None:
        sweep['pt'] = dataclasses.replace(config.pt, budget_threshold=args.budget_threshold)
    return dataclasses.replace(config, **sweep) if sweep else config


def cmd_bench(args) -> int:
    config = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    config = _apply_sweep_flags(config, args)
    if args.output_dir or os.getenv(ENV_OUTPUT_DIR):
        config.output_dir = str(_output_dir(args))
    workers = args.workers or _env_workers()

    frame = run_experiment(config, n_jobs=workers, progress=args.progress)
    analyzer = PerformanceAnalyzer(frame)
    print(f"📊 {len(frame)} row(s) written to {config.results_path}")
    print(analyzer.summarize().to_string())
    report = analyzer.ordering_report()
    if not report.empty:
        print(report.to_string())
    print(analyzer.timing_table().to_string())
    print(f"⏱️  Total scheme time: {format_seconds(frame['wall_time_seconds'].sum())}")
    return 0


def cmd_export_dot(args) -> int:
    instance = read_instance(args.instance)
    result = solve_scheme(args.scheme, instance, args.seed, _ib_config(args),
                          train_config=_train_config(args, args.seed))
    text = export_topology_dot(instance, result.topology, result.slots)
    if args.output:
        _write_text(Path(args.output), text)
        print(f"💾 DOT written to {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='relay_planner',
                                     description='Relay topology planning for energy-harvesting TDMA networks.')
    parser.add_argument('-v', '--verbose', action='store_true', help='DEBUG logging')
    sub = parser.add_subparsers(dest='command', required=True)

    def add_solver_options(p):
        p.add_argument('--seed', type=int, default=DEFAULT_BASE_SEED)
        p.add_argument('--eps1', type=float, default=IbConfig.eps1)
        p.add_argument('--eps2', type=float, default=IbConfig.eps2)
        p.add_argument('--max-epochs', type=int, default=TrainConfig.max_epochs)
        p.add_argument('--learning-rate', type=float, default=AdamConfig.learning_rate)
        p.add_argument('--budget-threshold', type=float, default=PtConfig.budget_threshold)
        p.add_argument('--progress', action='store_true')

    p = sub.add_parser('generate', help='Sample an instance file')
    p.add_argument('--seed', type=int, default=DEFAULT_BASE_SEED)
    p.add_argument('--n-devices', type=int, required=True)
    p.add_argument('--n-beacons', type=int, required=True)
    p.add_argument('--pb-power', type=float, default=SystemParams.pb_power)
    p.add_argument('-o', '--output', type=Path, required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser('solve', help='Topology and slots for one instance')
    p.add_argument('instance', type=Path)
    p.add_argument('--scheme', choices=SCHEMES, required=True)
    p.add_argument('--output-dir')
    add_solver_options(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser('train', help='Train the generator; write curves and a checkpoint')
    p.add_argument('instance', type=Path)
    p.add_argument('--output-dir')
    p.add_argument('--resume', type=Path, help='Start from a saved checkpoint')
    p.add_argument('--extra-epochs', type=int, default=0, help='Epochs to continue after stopping')
    add_solver_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('bench', help='Run a sweep and write the result CSV')
    p.add_argument('--config', type=Path, help='Experiment JSON file')
    p.add_argument('--workers', type=int)
    p.add_argument('--output-dir')
    p.add_argument('--schemes', nargs='+', choices=SCHEMES)
    p.add_argument('--n-devices', nargs='+', type=int)
    p.add_argument('--n-beacons', nargs='+', type=int)
    p.add_argument('--pb-power', nargs='+', type=float)
    p.add_argument('--seeds', type=int, help='Replicates per cell')
    p.add_argument('--base-seed', type=int)
    p.add_argument('--eps1', type=float)
    p.add_argument('--eps2', type=float)
    p.add_argument('--max-epochs', type=int)
    p.add_argument('--learning-rate', type=float)
    p.add_argument('--budget-threshold', type=float)
    p.add_argument('--progress', action='store_true')
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser('export-dot', help='Solve an instance and print its DOT graph')
    p.add_argument('instance', type=Path)
    p.add_argument('--scheme', choices=SCHEMES, default='mst')
    p.add_argument('-o', '--output')
    add_solver_options(p)
    p.set_defaults(func=cmd_export_dot)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as e:
        logger.error("%s", e)
        print(f"❌ {e}", file=sys.stderr)
        return 1
