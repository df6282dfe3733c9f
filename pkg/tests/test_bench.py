"""Tests for the experiment harness, exporters, analysis and command line."""

import json
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.network.system_model import generate_instance
from src.network.instance_io import read_instance
from src.allocation.ib_allocator import SlotAllocation, allocate
from src.topology.baselines import direct_topology, mst_topology
from src.generator.network import init_net, forward
from src.generator.trainer import TrainConfig, train
from src.analysis.performance import PerformanceAnalyzer
from src.bench import experiment
from src.bench.experiment import (
    RESULT_COLUMNS,
    ExperimentConfig,
    derive_cell_seed,
    read_results,
    run_experiment,
    solve_scheme,
)
from src.bench.export import (
    export_soft_adjacency_dot,
    export_topology_dot,
    training_curves,
    write_slots_csv,
)
from src.bench.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"


def small_sweep(tmp_path, **overrides):
    values = dict(
        schemes=['direct', 'mst', 'greedy', 'proposed'],
        n_devices=[3],
        n_beacons=[1, 2, 3],
        seeds_per_cell=5,
        output_dir=str(tmp_path),
        train=TrainConfig(max_epochs=5, track_b_min=False),
    )
    values.update(overrides)
    return ExperimentConfig(**values)


class TestExperiment:

    @pytest.mark.slow
    def test_row_count_and_columns(self, tmp_path):
        frame = run_experiment(small_sweep(tmp_path))
        assert len(frame) == 60
        assert list(frame.columns) == RESULT_COLUMNS
        assert (frame['error'] == "").all()
        assert frame['valid'].all()
        assert (tmp_path / "results.csv").exists()

    def test_deterministic_apart_from_timing(self, tmp_path):
        first = run_experiment(small_sweep(tmp_path / "a", seeds_per_cell=2))
        second = run_experiment(small_sweep(tmp_path / "b", seeds_per_cell=2))
        columns = [c for c in RESULT_COLUMNS if c != 'wall_time_seconds']
        pd.testing.assert_frame_equal(first[columns], second[columns])

    def test_read_results_round_trip(self, tmp_path):
        config = small_sweep(tmp_path, schemes=['direct', 'mst'], n_beacons=[2], seeds_per_cell=3)
        frame = run_experiment(config)
        rows = read_results(config.results_path)
        assert len(rows) == len(frame)
        for row, (_, record) in zip(rows, frame.iterrows()):
            assert row.scheme == record['scheme'] and row.seed == record['seed']
            assert row.min_bits_per_hz == pytest.approx(record['min_bits_per_hz'])
            assert row.valid and row.error == ""

    def test_failed_scheme_becomes_error_row(self, tmp_path, monkeypatch):
        original = experiment.solve_scheme

        def flaky(scheme, *args, **kwargs):
            if scheme == 'mst':
                raise RuntimeError("allocator blew up")
            return original(scheme, *args, **kwargs)

        monkeypatch.setattr(experiment, "solve_scheme", flaky)
        frame = run_experiment(small_sweep(tmp_path, schemes=['direct', 'mst'], n_beacons=[1],
                                           seeds_per_cell=2))
        failed = frame[frame['scheme'] == 'mst']
        assert failed['error'].str.startswith("RuntimeError").all()
        assert not failed['valid'].any()
        assert math.isnan(failed['min_bits_per_hz'].iloc[0])
        assert (frame[frame['scheme'] == 'direct']['error'] == "").all()

    def test_cell_seed_is_stable(self):
        seed = derive_cell_seed(2023, 5, 2, 1.0, 3)
        assert seed == derive_cell_seed(2023, 5, 2, 1.0, 3)
        assert seed != derive_cell_seed(2023, 5, 2, 1.0, 4)
        assert 0 <= seed < 2 ** 32

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="Unknown"):
            ExperimentConfig.from_dict({"bogus": 1})
        with pytest.raises(ValueError, match="Unknown"):
            ExperimentConfig.from_dict({"train": {"epochs": 5}})

    def test_opt_guard(self):
        with pytest.raises(ValueError, match="opt"):
            ExperimentConfig(schemes=['opt'], n_devices=[9])

    def test_from_dict_builds_nested_configs(self):
        config = ExperimentConfig.from_dict({
            "system": {"pb_power": 3.0},
            "train": {"max_epochs": 7, "snapshot_epochs": [0, 5]},
            "ib": {"eps1": 1e-5},
        })
        assert config.system.pb_power == 3.0
        assert config.train.max_epochs == 7 and config.train.snapshot_epochs == (0, 5)
        assert config.ib.eps1 == 1e-5

    def test_shipped_configs_parse(self):
        for name in ("example_config.json", "power_sweep_config.json"):
            ExperimentConfig.from_json(CONFIG_DIR / name)

    def test_solve_scheme_rejects_unknown(self, small_instance):
        with pytest.raises(ValueError, match="Unknown scheme"):
            solve_scheme("random", small_instance)

    def test_solve_scheme_opt_matches_search(self, small_instance):
        result = solve_scheme("opt", small_instance)
        for topology in (direct_topology(3), mst_topology(small_instance)):
            assert result.b_ib >= allocate(small_instance, topology).b_ib - 1e-6


class TestExport:

    def test_topology_dot(self, medium_instance):
        topology = mst_topology(medium_instance)
        result = allocate(medium_instance, topology)
        text = export_topology_dot(medium_instance, topology, result.slots)
        lines = text.splitlines()
        assert lines[0] == "digraph relay {" and lines[-1] == "}"
        nodes = [l for l in lines if "shape=" in l]
        edges = [l for l in lines if "->" in l]
        assert len(nodes) == medium_instance.n_devices + 1
        assert len(edges) == medium_instance.n_devices
        assert text == export_topology_dot(medium_instance, topology, result.slots)

    def test_direct_star_counts(self):
        instance = generate_instance(1, 2, 1)
        lines = export_topology_dot(instance, direct_topology(2)).splitlines()
        assert sum("shape=" in l for l in lines) == 3
        assert sum("->" in l for l in lines) == 2

    def test_soft_dot_skips_light_edges(self, small_instance):
        net = init_net(3, seed=0)
        soft = forward(net, np.full(net.latent_size, 0.5))
        text = export_soft_adjacency_dot(small_instance, soft, min_weight=0.0)
        assert sum("->" in l for l in text.splitlines()) == 3 * 3
        text = export_soft_adjacency_dot(small_instance, soft, min_weight=1.1)
        assert "->" not in text

    def test_training_curves(self, small_instance):
        history = train(small_instance, TrainConfig(max_epochs=6))
        curves = training_curves(history)
        assert list(curves.columns) == ['epoch', 'loss', 'running_min_loss', 'b_min']
        assert len(curves) == 6
        assert curves['running_min_loss'].is_monotonic_decreasing

    def test_slots_csv(self, tmp_path):
        slots = SlotAllocation.uniform(3, 0.1)
        path = write_slots_csv(slots, tmp_path / "slots.csv", budgets=[0.1, 0.2, 0.3])
        frame = pd.read_csv(path)
        assert list(frame.columns) == ['device', 'slot_seconds', 'share', 'bits_per_hz']
        assert frame['share'].sum() == pytest.approx(1.0)


class TestAnalysis:

    @pytest.fixture
    def frame(self):
        values = {'direct': [0.1, 0.2], 'mst': [0.2, 0.1], 'greedy': [0.15, 0.15],
                  'opt': [0.3, 0.3], 'proposed': [0.25, 0.2]}
        rows = []
        for scheme, per_seed in values.items():
            for seed, value in enumerate(per_seed):
                rows.append(dict(scheme=scheme, n_devices=5, n_beacons=2, pb_power=1.0, seed=seed,
                                 min_bits_per_hz=value, max_bits_per_hz=value,
                                 wall_time_seconds=0.01, epochs=0, valid=True,
                                 fallback=False, error=""))
        rows.append(dict(rows[0], seed=2, min_bits_per_hz=float('nan'), valid=False,
                         error="RuntimeError: failed"))
        return pd.DataFrame(rows, columns=RESULT_COLUMNS)

    def test_summary_counts_failures(self, frame):
        summary = PerformanceAnalyzer(frame).summarize()
        direct = summary.loc[('direct', 5, 2, 1.0)]
        assert direct['runs'] == 2 and direct['failed'] == 1
        assert direct['mean_min_bits'] == pytest.approx(0.15)

    def test_ordering_report(self, frame):
        report = PerformanceAnalyzer(frame).ordering_report()
        row = report.iloc[0]
        assert row['best_baseline'] == pytest.approx(0.15)
        assert row['beats_baselines']
        assert row['ratio_to_opt'] == pytest.approx(0.225 / 0.3)
        assert row['majority_wins'] == pytest.approx(1.0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            PerformanceAnalyzer(pd.DataFrame(columns=RESULT_COLUMNS))


class TestCli:

    @pytest.fixture(autouse=True)
    def _clean_env(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.delenv("RELAY_WORKERS", raising=False)
        monkeypatch.delenv("RELAY_OUTPUT_DIR", raising=False)

    @pytest.fixture
    def instance_file(self, tmp_path):
        path = tmp_path / "inst.txt"
        assert main(['generate', '--seed', '3', '--n-devices', '3', '--n-beacons', '2',
                     '-o', str(path)]) == 0
        return path

    def test_generate(self, instance_file):
        instance = read_instance(instance_file)
        reference = generate_instance(3, 3, 2)
        np.testing.assert_array_equal(instance.device_positions, reference.device_positions)

    def test_solve(self, instance_file, tmp_path):
        out = tmp_path / "out"
        assert main(['solve', str(instance_file), '--scheme', 'mst', '--output-dir', str(out)]) == 0
        assert (out / "inst_mst_slots.csv").exists()
        assert (out / "inst_mst.dot").read_text().startswith("digraph relay {")

    def test_export_dot(self, instance_file, tmp_path, capsys):
        assert main(['export-dot', str(instance_file), '--scheme', 'direct']) == 0
        assert capsys.readouterr().out.count("-> sink") == 3
        target = tmp_path / "direct.dot"
        assert main(['export-dot', str(instance_file), '--scheme', 'direct', '-o', str(target)]) == 0
        assert target.exists()

    def test_train_and_resume(self, instance_file, tmp_path):
        out = tmp_path / "train"
        assert main(['train', str(instance_file), '--max-epochs', '5', '--output-dir', str(out)]) == 0
        curves = pd.read_csv(out / "inst_training.csv")
        assert len(curves) == 5
        assert (out / "inst_epoch0.dot").exists()
        checkpoint = out / "inst_generator.npz"
        assert checkpoint.exists()
        assert main(['train', str(instance_file), '--max-epochs', '3', '--resume', str(checkpoint),
                     '--output-dir', str(tmp_path / "again")]) == 0

    def test_bench(self, tmp_path):
        config = tmp_path / "sweep.json"
        config.write_text(json.dumps({
            "schemes": ["direct", "mst"], "n_devices": [3], "n_beacons": [1],
            "seeds_per_cell": 2, "results_file": "sweep.csv",
        }))
        out = tmp_path / "bench"
        assert main(['bench', '--config', str(config), '--output-dir', str(out), '--workers', '1']) == 0
        assert len(pd.read_csv(out / "sweep.csv")) == 4

    def test_bench_flags_override_config(self, tmp_path):
        config = tmp_path / "sweep.json"
        config.write_text(json.dumps({
            "schemes": ["direct", "mst"], "n_devices": [3], "n_beacons": [1],
            "seeds_per_cell": 2, "results_file": "sweep.csv",
        }))
        out = tmp_path / "bench"
        assert main(['bench', '--config', str(config), '--output-dir', str(out), '--workers', '1',
                     '--schemes', 'direct', '--n-devices', '2', '3', '--n-beacons', '2',
                     '--pb-power', '0.5', '--seeds', '1', '--eps1', '1e-5']) == 0
        frame = pd.read_csv(out / "sweep.csv")
        assert list(frame['scheme']) == ['direct', 'direct']
        assert list(frame['n_devices']) == [2, 3]
        assert (frame['n_beacons'] == 2).all()
        assert (frame['pb_power'] == 0.5).all()

    def test_bench_flags_without_config(self, tmp_path):
        out = tmp_path / "bench"
        assert main(['bench', '--output-dir', str(out), '--workers', '1', '--schemes', 'direct', 'mst',
                     '--n-devices', '3', '--n-beacons', '1', '--seeds', '2', '--base-seed', '7']) == 0
        frame = pd.read_csv(out / "results.csv")
        assert len(frame) == 4
        expected = derive_cell_seed(7, 3, 1, 1.0, 0)
        assert frame['seed'].iloc[0] == expected

    def test_bench_rejects_unknown_scheme_flag(self):
        with pytest.raises(SystemExit):
            main(['bench', '--schemes', 'random'])

    def test_bench_prints_timing_table(self, tmp_path, monkeypatch, capsys):
        calls = []
        timing = PerformanceAnalyzer.timing_table

        def recorded(self):
            table = timing(self)
            calls.append(table)
            return table

        monkeypatch.setattr(PerformanceAnalyzer, "timing_table", recorded)
        assert main(['bench', '--output-dir', str(tmp_path / "bench"), '--workers', '1',
                     '--schemes', 'direct', '--n-devices', '3', '4', '--seeds', '1']) == 0
        assert len(calls) == 1
        assert list(calls[0].index) == [3, 4]
        assert calls[0].to_string() in capsys.readouterr().out

    def test_solve_writes_budgets(self, instance_file, tmp_path):
        out = tmp_path / "out"
        assert main(['solve', str(instance_file), '--scheme', 'direct', '--output-dir', str(out)]) == 0
        frame = pd.read_csv(out / "inst_direct_slots.csv")
        assert list(frame.columns) == ['device', 'slot_seconds', 'share', 'bits_per_hz']
        instance = read_instance(instance_file)
        result = allocate(instance, direct_topology(3))
        np.testing.assert_allclose(frame['bits_per_hz'], result.budgets)

    @pytest.mark.parametrize("command", [
        ['generate', '--seed', '5', '--n-devices', '4', '--n-beacons', '2', '-o', '{out}/inst.txt'],
        ['solve', '{instance}', '--scheme', 'greedy', '--output-dir', '{out}'],
        ['solve', '{instance}', '--scheme', 'proposed', '--max-epochs', '5', '--output-dir', '{out}'],
        ['train', '{instance}', '--max-epochs', '5', '--output-dir', '{out}'],
        ['export-dot', '{instance}', '--scheme', 'mst', '-o', '{out}/mst.dot'],
    ])
    def test_reruns_are_byte_identical(self, instance_file, tmp_path, command):
        runs = []
        for name in ("first", "second"):
            out = tmp_path / name
            out.mkdir()
            argv = [a.format(out=out, instance=instance_file) for a in command]
            assert main(argv) == 0
            runs.append(out)
        first = sorted(p.name for p in runs[0].iterdir())
        assert first and first == sorted(p.name for p in runs[1].iterdir())
        for name in first:
            a, b = runs[0] / name, runs[1] / name
            if a.suffix == ".npz":
                # zip members carry a write timestamp
                with np.load(a) as left, np.load(b) as right:
                    assert sorted(left.files) == sorted(right.files)
                    for key in left.files:
                        np.testing.assert_array_equal(left[key], right[key])
            else:
                assert a.read_bytes() == b.read_bytes()

    def test_invalid_input_returns_error_code(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("not an instance\n")
        assert main(['solve', str(bad), '--scheme', 'mst']) == 1

    def test_bad_worker_env(self, monkeypatch):
        monkeypatch.setenv("RELAY_WORKERS", "many")
        assert main(['bench']) == 1
