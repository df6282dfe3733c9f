"""Tests for the topology generator and its training loop."""

import math
import time

import numpy as np
import pandas as pd
import pytest

from src.autodiff.tape import Tape, TapeDomainError
from src.evaluation.packet_tracing import rate_pt, training_loss
from src.network.system_model import SystemParams, Topology, generate_instance, validate_topology
from src.allocation.ib_allocator import IbNonConvergenceError, b_ib
from src.topology.baselines import direct_topology, greedy_topology, mst_topology, optimal_topology
from src.bench.export import emit_training_curves
from src.generator import trainer as trainer_module
from src.generator.network import (
    AdamConfig,
    AdamState,
    CheckpointFormatError,
    SoftAdjacency,
    adam_update,
    forward,
    init_net,
    layer_sizes,
    load_checkpoint,
    post_process,
    save_checkpoint,
)
from src.generator.trainer import (
    GeneratorTrainer,
    TrainConfig,
    TrainingError,
    propose_topology,
    train,
)


class TestNetwork:

    @pytest.mark.parametrize("n_devices,expected", [
        (1, (1, 1, 2, 2, 2)),
        (4, (8, 11, 14, 17, 20)),
        (25, (125, 256, 388, 519, 650)),
    ])
    def test_layer_sizes(self, n_devices, expected):
        assert layer_sizes(n_devices) == expected

    def test_init_bounds_and_zero_biases(self):
        net = init_net(4, seed=0)
        for w in net.weights:
            fan_out, fan_in = w.shape
            assert np.abs(w).max() <= math.sqrt(6 / (fan_in + fan_out))
        for b in net.biases:
            np.testing.assert_array_equal(b, 0.0)
        assert net.sizes == layer_sizes(4)

    def test_init_deterministic(self):
        a, b = init_net(3, seed=5), init_net(3, seed=5)
        for x, y in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(x, y)

    def test_forward_rows_are_distributions(self):
        net = init_net(4, seed=1)
        z = np.random.default_rng(1).random(net.latent_size)
        soft = forward(net, z)
        assert soft.matrix.shape == (4, 5)
        np.testing.assert_allclose(soft.matrix.sum(axis=1), 1.0, atol=1e-9)
        assert np.all((soft.matrix > 0) & (soft.matrix < 1))

    def test_forward_rejects_wrong_latent(self):
        net = init_net(4, seed=1)
        with pytest.raises(ValueError, match="Latent"):
            forward(net, np.zeros(net.latent_size + 1))

    def test_soft_adjacency_feeds_the_evaluator(self, small_instance):
        net = init_net(3, seed=1)
        tape = Tape()
        params = net.bind(tape)
        soft = forward(net, np.full(net.latent_size, 0.5), tape, params)
        loss = training_loss(rate_pt(small_instance, soft))
        grads = tape.backward(loss, params)
        assert 0 < loss.item() <= 1
        assert any(np.abs(g).sum() > 0 for g in grads)

    def test_post_process_picks_row_argmax(self):
        soft = SoftAdjacency(np.array([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]]))
        assert post_process(soft).parents.tolist() == [1, 0]

    def test_post_process_ties_pick_lowest_column(self):
        matrix = np.array([[0.1, 0.45, 0.45], [0.2, 0.4, 0.4]])
        assert post_process(matrix).parents.tolist() == [1, 1]

    def test_soft_adjacency_rejects_bad_rows(self):
        with pytest.raises(ValueError):
            SoftAdjacency(np.array([[0.5, 0.6]]))


class TestAdam:

    def test_first_step(self):
        theta = [np.array([0.0])]
        state = AdamState.zeros_like(theta)
        adam_update(theta, [np.array([1.0])], AdamConfig(), state)
        assert theta[0][0] == pytest.approx(-0.000999999990, abs=1e-15)
        assert state.step == 1

    def test_zero_gradient_leaves_parameters(self):
        theta = [np.array([0.3, -0.2])]
        state = AdamState.zeros_like(theta)
        adam_update(theta, [np.zeros(2)], AdamConfig(), state)
        np.testing.assert_array_equal(theta[0], [0.3, -0.2])

    def test_rejects_misaligned_gradients(self):
        theta = [np.zeros(2)]
        with pytest.raises(ValueError):
            adam_update(theta, [np.zeros(3)], AdamConfig(), AdamState.zeros_like(theta))

    @pytest.mark.parametrize("kwargs", [{"learning_rate": 0.0}, {"beta1": 1.0}, {"epsilon": 0.0}])
    def test_config_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            AdamConfig(**kwargs)


class TestCheckpoint:

    def test_round_trip(self, tmp_path):
        net = init_net(3, seed=2)
        state = AdamState.zeros_like(net.parameters())
        state.m[0] += 0.5
        state.step = 7
        path = save_checkpoint(tmp_path / "gen.npz", net, state, epoch=12)

        loaded, loaded_state, epoch = load_checkpoint(path)
        assert epoch == 12 and loaded_state.step == 7
        assert loaded.sizes == net.sizes
        for x, y in zip(loaded.parameters(), net.parameters()):
            np.testing.assert_array_equal(x, y)
        np.testing.assert_array_equal(loaded_state.m[0], state.m[0])

    def test_rejects_other_version(self, tmp_path):
        path = tmp_path / "old.npz"
        np.savez(path, version=np.array(99))
        with pytest.raises(CheckpointFormatError, match="version"):
            load_checkpoint(path)

    def test_rejects_missing_fields(self, tmp_path):
        path = tmp_path / "partial.npz"
        np.savez(path, version=np.array(1), n_devices=np.array(2))
        with pytest.raises(CheckpointFormatError, match="missing"):
            load_checkpoint(path)


class TestTraining:

    def test_short_run(self, small_instance):
        result = train(small_instance, TrainConfig(max_epochs=25))
        assert result.epochs == 25
        assert len(result.losses) == len(result.b_min) == 25
        assert all(0 < loss <= 1 for loss in result.losses)
        running = result.running_min_loss
        assert all(b <= a for a, b in zip(running, running[1:]))
        assert result.best_loss == min(result.losses)
        assert set(result.snapshots) == {0, 10}

    def test_reproducible(self, small_instance):
        config = TrainConfig(max_epochs=15, net_seed=3, latent_seed=4)
        first = train(small_instance, config)
        second = train(small_instance, config)
        assert first.losses == second.losses
        np.testing.assert_array_equal(first.champion.matrix, second.champion.matrix)

    def test_patience_stops_training(self, small_instance):
        result = train(small_instance, TrainConfig(max_epochs=500, patience=3))
        assert result.epochs - 1 - result.champion_epoch <= 3
        assert result.epochs < 500 or result.champion_epoch >= 496

    def test_default_patience(self):
        assert TrainConfig().resolve_patience(25) == 50
        assert TrainConfig().resolve_patience(3) == math.ceil(30 + 500 / 3)

    def test_continue_ignores_stopping_rule(self, small_instance):
        trainer = GeneratorTrainer(small_instance, TrainConfig(max_epochs=5))
        trainer.train()
        result = trainer.continue_for(4)
        assert result.epochs == 9

    def test_rejects_mismatched_net(self, small_instance):
        with pytest.raises(ValueError):
            GeneratorTrainer(small_instance, net=init_net(4, seed=0))

    def test_domain_error_names_epoch(self, small_instance, monkeypatch):
        def broken(*args, **kwargs):
            raise TapeDomainError("log2 of a non-positive argument")

        monkeypatch.setattr(trainer_module, "rate_pt", broken)
        with pytest.raises(TrainingError, match="Epoch 0"):
            train(small_instance, TrainConfig(max_epochs=3))


class TestProposal:

    def test_single_device_is_direct(self):
        instance = generate_instance(4, 1, 1)
        proposal = propose_topology(instance)
        assert proposal.topology == direct_topology(1)
        assert proposal.training is None and proposal.epochs == 0

    def test_value_matches_balanced_topology(self, small_instance):
        topology, slots, value = propose_topology(small_instance, TrainConfig(max_epochs=20))
        assert validate_topology(topology)
        assert value == pytest.approx(b_ib(small_instance, topology))
        assert slots.slots.sum() == pytest.approx(small_instance.params.frame_T)

    def test_invalid_champion_falls_back_to_direct(self, monkeypatch):
        instance = generate_instance(8, 2, 1)
        monkeypatch.setattr(trainer_module, "post_process",
                            lambda soft: Topology.from_parents([1, 0]))
        proposal = propose_topology(instance, TrainConfig(max_epochs=3, track_b_min=False))
        assert proposal.fallback
        assert proposal.topology == direct_topology(2)

    def test_unbalanced_champion_falls_back_to_direct(self, monkeypatch):
        instance = generate_instance(8, 3, 1)
        balance = trainer_module.allocate

        def direct_only(instance, topology, config=None):
            if topology != direct_topology(instance.n_devices):
                raise IbNonConvergenceError("gap still shrinking at the cap")
            return balance(instance, topology, config)

        monkeypatch.setattr(trainer_module, "post_process",
                            lambda soft: Topology.from_parents([3, 0, 3]))
        monkeypatch.setattr(trainer_module, "allocate", direct_only)
        proposal = propose_topology(instance, TrainConfig(max_epochs=3, track_b_min=False))
        assert proposal.fallback
        assert proposal.topology == direct_topology(3)
        assert proposal.b_ib == pytest.approx(b_ib(instance, direct_topology(3)))

    def test_floor_limited_champion_is_kept(self, monkeypatch):
        instance = generate_instance(2029, 5, 1)
        monkeypatch.setattr(trainer_module, "post_process",
                            lambda soft: Topology.from_parents([1, 5, 1, 1, 1]))
        proposal = propose_topology(instance, TrainConfig(max_epochs=3, track_b_min=False))
        assert not proposal.fallback
        assert proposal.topology == Topology.from_parents([1, 5, 1, 1, 1])
        assert proposal.budgets.shape == (5,)


@pytest.mark.slow
class TestDeskScale:

    def test_training_is_stable_at_25_devices(self):
        instance = generate_instance(2023, 25, 2)
        trainer = GeneratorTrainer(instance)
        result = trainer.train()
        assert result.losses[0] == pytest.approx(1.0, abs=0.02)
        running = result.running_min_loss
        assert all(b <= a for a, b in zip(running, running[1:]))

        assert 0.6 < result.best_loss < 0.9

        before = result.b_min[-1]
        after = trainer.continue_for(100).b_min[-1]
        assert abs(after - before) < 0.01 * abs(before)

    @pytest.mark.parametrize("n_beacons", [1, 2, 3])
    def test_proposed_against_baselines_at_5_devices(self, n_beacons):
        totals = {"direct": 0.0, "mst": 0.0, "greedy": 0.0, "opt": 0.0, "proposed": 0.0}
        for seed in range(10):
            instance = generate_instance(2023 + seed, 5, n_beacons)
            totals["direct"] += b_ib(instance, direct_topology(5))
            totals["mst"] += b_ib(instance, mst_topology(instance))
            totals["greedy"] += b_ib(instance, greedy_topology(instance, seed))
            totals["opt"] += optimal_topology(instance, n_jobs=-1).b_ib
            totals["proposed"] += propose_topology(instance, TrainConfig(net_seed=seed)).b_ib
        assert totals["proposed"] >= max(totals["direct"], totals["mst"], totals["greedy"])
        assert totals["proposed"] >= 0.85 * totals["opt"]

    def test_champion_b_min_curve_rises(self, tmp_path):
        instance = generate_instance(2023, 25, 2)
        history = train(instance)
        curves = pd.read_csv(emit_training_curves(history, tmp_path / "curves.csv"))
        b_min = curves['b_min'].dropna()
        assert len(b_min) > 1
        assert b_min.iloc[-1] > b_min.iloc[0]

    @pytest.mark.parametrize("pb_power", [0.3, 1.0, 3.0])
    def test_beacon_power_sweep_ordering(self, pb_power):
        means = {"mst": 0.0, "greedy": 0.0, "proposed": 0.0}
        for seed in range(5):
            instance = generate_instance(2023 + seed, 25, 2, SystemParams(pb_power=pb_power))
            means["mst"] += b_ib(instance, mst_topology(instance)) / 5
            means["greedy"] += b_ib(instance, greedy_topology(instance, seed)) / 5
            means["proposed"] += propose_topology(instance, TrainConfig(net_seed=seed)).b_ib / 5
        assert means["proposed"] > means["mst"]
        assert means["proposed"] > means["greedy"]

    def test_search_time_outgrows_training_time(self):
        elapsed = {"opt": [], "proposed": []}
        for n_devices in (4, 6):
            instance = generate_instance(2023, n_devices, 2)
            start = time.perf_counter()
            optimal_topology(instance)
            elapsed["opt"].append(time.perf_counter() - start)
            start = time.perf_counter()
            propose_topology(instance, TrainConfig(max_epochs=50, track_b_min=False))
            elapsed["proposed"].append(time.perf_counter() - start)
        opt_growth = elapsed["opt"][1] / elapsed["opt"][0]
        proposed_growth = elapsed["proposed"][1] / elapsed["proposed"][0]
        assert opt_growth > 10 * proposed_growth
