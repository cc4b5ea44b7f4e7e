"""Tests for the deterministic federation simulator.

``reference_sample`` below is a from-scratch reimplementation of the
documented selection stream (SHA-256 counter keystream + partial
Fisher-Yates); the simulator's sampler must agree with it draw for draw.
"""

import hashlib
import math
import random

import numpy as np
import pytest

from fedsust.config import parse_config
from fedsust.fedsim import (
    SelectionStream,
    SimulationError,
    accumulate_class_distribution,
    aggregate_model,
    client_class_counts,
    hash_label,
    run_federation,
    run_salt,
    sample_clients,
)


def reference_sample(seed: int, round_index: int, population: int, draw: int) -> tuple:
    """Independent oracle for the documented client-selection algorithm."""
    words = []
    counter = 0

    def next_word():
        nonlocal words, counter
        if not words:
            digest = hashlib.sha256(
                b"fedsust-sample"
                + seed.to_bytes(8, "big")
                + round_index.to_bytes(8, "big")
                + counter.to_bytes(8, "big")
            ).digest()
            counter += 1
            words = [
                int.from_bytes(digest[0:8], "big"),
                int.from_bytes(digest[8:16], "big"),
                int.from_bytes(digest[16:24], "big"),
                int.from_bytes(digest[24:32], "big"),
            ]
        return words.pop(0)

    arrangement = list(range(population))
    for position in range(draw):
        offset = next_word() % (population - position)
        target = position + offset
        arrangement[position], arrangement[target] = arrangement[target], arrangement[position]
    return tuple(sorted(arrangement[:draw]))


def make_config(**kwargs):
    base = dict(
        name="sim",
        num_clients=5,
        total_rounds=10,
        sample_size=1,
        local_rounds=1,
        dataset_size=100,
        model_size=1000,
        client_hardware="Intel Core i7-1250U",
        client_locations="AL",
        server_hardware="Intel Core i7-1250U",
        server_location="AL",
        seed=42,
    )
    base.update(kwargs)
    return parse_config(base)


# ── client sampling ───────────────────────────────────────────────────────


class TestSampleClients:
    def test_full_population_draw_is_everyone(self):
        got = sample_clients(7, 7, SelectionStream(1, 1))
        assert got == tuple(range(7))

    def test_identical_stream_state_gives_identical_subsets(self):
        a = sample_clients(50, 10, SelectionStream(9, 3))
        b = sample_clients(50, 10, SelectionStream(9, 3))
        assert a == b

    def test_oversized_draw_rejected(self):
        with pytest.raises(SimulationError):
            sample_clients(5, 6, SelectionStream(1, 1))
        with pytest.raises(SimulationError):
            sample_clients(5, 0, SelectionStream(1, 1))

    def test_subsets_are_sorted_unique_and_in_range(self):
        for t in range(200):
            got = sample_clients(23, 7, SelectionStream(5, t))
            assert len(set(got)) == 7
            assert list(got) == sorted(got)
            assert all(0 <= c < 23 for c in got)

    def test_matches_independent_reference_sampler(self):
        for seed, n, m in ((42, 5, 2), (7, 23, 7), (2**63, 100, 1), (0, 4, 4)):
            for t in range(250):
                assert sample_clients(n, m, SelectionStream(seed, t)) == \
                    reference_sample(seed, t, n, m)

    def test_single_draw_frequencies_are_uniform(self):
        # 1e5 draws of 1 from 8: each client expected at 12500 +- 3 sigma
        n, draws = 8, 100_000
        counts = [0] * n
        for t in range(draws):
            (c,) = sample_clients(n, 1, SelectionStream(99, t))
            counts[c] += 1
        p = 1 / n
        sigma = math.sqrt(draws * p * (1 - p))
        for c in range(n):
            assert abs(counts[c] - draws * p) <= 3 * sigma, counts


# ── model aggregation ─────────────────────────────────────────────────────


class TestAggregateModel:
    def test_pairwise_mean(self):
        got = aggregate_model([np.array([1.0, 1.0]), np.array([3.0, 3.0])])
        assert np.array_equal(got, np.array([2.0, 2.0]))

    def test_single_update_is_identity(self):
        update = np.array([0.5, -1.5, 2.0])
        assert np.array_equal(aggregate_model([update]), update)

    def test_matches_bruteforce_mean_on_random_instances(self):
        rng = random.Random(21)
        for _ in range(100):
            k = rng.randint(1, 9)
            length = rng.randint(1, 40)
            vectors = [
                np.array([rng.uniform(-100, 100) for _ in range(length)])
                for _ in range(k)
            ]
            got = aggregate_model(vectors)
            for idx in range(length):
                expected = sum(float(v[idx]) for v in vectors) / k
                assert got[idx] == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(SimulationError):
            aggregate_model([np.zeros(3), np.zeros(4)])
        with pytest.raises(SimulationError):
            aggregate_model([])


# ── class distributions ───────────────────────────────────────────────────


class TestClassDistribution:
    def test_disjoint_labels_union(self):
        salt = run_salt(1)
        dist: dict[str, int] = {}
        accumulate_class_distribution(dist, {"a": 10}, salt)
        accumulate_class_distribution(dist, {"b": 5}, salt)
        assert len(dist) == 2
        assert sum(dist.values()) == 15

    def test_shared_labels_sum(self):
        salt = run_salt(1)
        dist: dict[str, int] = {}
        accumulate_class_distribution(dist, {"a": 10, "b": 1}, salt)
        accumulate_class_distribution(dist, {"a": 4}, salt)
        assert dist[hash_label(salt, "a")] == 14
        assert dist[hash_label(salt, "b")] == 1

    def test_thousand_synthetic_clients_conserve_totals(self):
        salt = run_salt(3)
        dist: dict[str, int] = {}
        total = 0
        for c in range(1000):
            labels = client_class_counts(3, c, dataset_size=57, num_classes=10)
            assert sum(labels.values()) == 57
            total += 57
            accumulate_class_distribution(dist, labels, salt)
        assert sum(dist.values()) == total
        assert len(dist) == 10

    def test_no_raw_labels_in_map(self):
        salt = run_salt(4)
        dist: dict[str, int] = {}
        accumulate_class_distribution(dist, {"class_3": 5}, salt)
        assert "class_3" not in dist


# ── full runs ─────────────────────────────────────────────────────────────


class TestRunFederation:
    def test_selection_count_conservation(self, tables):
        config = make_config(num_clients=5, sample_size=1, total_rounds=10, seed=42)
        state = run_federation(config, tables)
        assert sum(state.selection_counts.values()) == 1 * 10

    def test_full_rate_means_full_participation(self, tables):
        config = make_config(num_clients=4, selection_rate=1.0, sample_size=4, total_rounds=6)
        state = run_federation(config, tables)
        assert all(s.participation_rate == 1.0 for s in state.statistics.values())

    def test_model_stays_finite(self, tables):
        config = make_config(num_clients=6, sample_size=3, total_rounds=50, model_size=64)
        state = run_federation(config, tables)
        assert np.all(np.isfinite(state.model))
        assert len(state.model) == 64

    def test_model_vector_capped(self, tables):
        config = make_config(model_size=10**9)
        state = run_federation(config, tables)
        assert len(state.model) == 4096

    def test_emissions_row_counts(self, tables):
        config = make_config(num_clients=5, sample_size=2, total_rounds=10)
        state = run_federation(config, tables)
        by_phase = state.emissions.co2eq_by(lambda r: r.phase)
        assert len([r for r in state.emissions.records if r.phase == "training"]) == 20
        assert len([r for r in state.emissions.records if r.phase == "aggregation"]) == 10
        assert set(by_phase) == {"training", "aggregation"}

    def test_communication_records_appear_when_priced(self, tables):
        config = make_config(energy_model={"comm_energy_per_byte": 1e-12})
        state = run_federation(config, tables)
        comm = [r for r in state.emissions.records if r.phase == "communication"]
        assert len(comm) == 10
        assert all(r.energy_kwh > 0 for r in comm)

    def test_identical_runs_identical_bytes(self, tables):
        config = make_config(
            num_clients=12, sample_size=5, total_rounds=8,
            client_locations=[{"share": 0.5, "location": "CH"}, {"share": 0.5, "location": "ZA"}],
        )
        a = run_federation(config, tables)
        b = run_federation(config, tables)
        assert a.emissions.to_csv_bytes() == b.emissions.to_csv_bytes()
        assert np.array_equal(a.model, b.model)

    def test_workers_do_not_change_results(self, tables):
        config = make_config(
            num_clients=20, sample_size=9, total_rounds=12,
            client_locations=[{"share": 0.25, "location": "CH"}, {"share": 0.75, "location": "ZA"}],
            client_hardware=[{"share": 0.5, "model": "Intel Core i7-8650U"},
                             {"share": 0.5, "model": "Intel Xeon E5-2650"}],
        )
        serial = run_federation(config, tables, workers=1)
        parallel = run_federation(config, tables, workers=4)
        assert serial.emissions.to_csv_bytes() == parallel.emissions.to_csv_bytes()
        assert np.array_equal(serial.model, parallel.model)
        assert serial.selection_counts == parallel.selection_counts

    def test_seed_changes_selection_but_not_row_counts(self, tables):
        a = run_federation(make_config(seed=1), tables)
        b = run_federation(make_config(seed=2), tables)
        assert len(a.emissions) == len(b.emissions)
        assert a.selection_counts != b.selection_counts

    def test_share_assignment_respects_population(self, tables):
        config = make_config(
            num_clients=10,
            client_locations=[{"share": 0.5, "location": "XK"}, {"share": 0.5, "location": "GM"}],
        )
        state = run_federation(config, tables)
        assert state.client_countries.count("XK") == 5
        assert state.client_countries.count("GM") == 5

    def test_participation_approaches_rate_statistically(self, tables):
        # Binomial check at T = 1e4: each of 10 clients selected with
        # p = 3/10 per round; allow 3 sigma.
        config = make_config(
            num_clients=10, sample_size=3, total_rounds=10_000, model_size=8,
            dataset_size=10, seed=13,
        )
        state = run_federation(config, tables)
        p = 0.3
        sigma = math.sqrt(p * (1 - p) / config.total_rounds)
        for stats in state.statistics.values():
            assert abs(stats.participation_rate - p) <= 3 * sigma

    def test_emissions_monotone_in_each_complexity_driver(self, tables):
        base = dict(num_clients=6, sample_size=3, total_rounds=4, local_rounds=2,
                    dataset_size=50, model_size=1000, seed=5)
        bumps = [
            ("total_rounds", 8), ("num_clients", 12), ("local_rounds", 5),
            ("dataset_size", 200), ("model_size", 4000), ("sample_size", 6),
        ]
        reference = run_federation(make_config(**base), tables).emissions.total_co2eq_g()
        for field, value in bumps:
            bumped = dict(base)
            bumped[field] = value
            if field == "num_clients":
                # keep the selection rate fixed while the fleet grows
                bumped["sample_size"] = base["sample_size"] * 2
            total = run_federation(make_config(**bumped), tables).emissions.total_co2eq_g()
            assert total >= reference, field

    def test_invalid_workers_rejected(self, tables):
        with pytest.raises(SimulationError):
            run_federation(make_config(), tables, workers=0)
