"""Tests for the coagulation of limiting cluster paths."""

import chex
import numpy as np
import pytest

import clustergas
from clustergas import LimitCluster


def singleton(pid: int, x: list[float], v: list[float]) -> LimitCluster:
    return LimitCluster.singleton(pid, np.array(x), np.array(v))


class TestMerge:
    def test_head_on_pair(self) -> None:
        a = singleton(0, [0.2, 0.5], [1.0, 0.0])
        b = singleton(1, [0.4, 0.5], [-1.0, 0.0])
        merged = clustergas.merge_clusters(a, b, 0, 1, 0.1, np.array([-1.0, 0.0]))
        assert merged.member_ids == (0, 1)
        assert merged.tree.edges == ((0, 1),)
        x, v = merged.state_at(0.2)
        chex.assert_trees_all_close(x, np.array([[0.2, 0.5], [0.4, 0.5]]), atol=1e-12)
        chex.assert_trees_all_close(v, np.array([[-1.0, 0.0], [1.0, 0.0]]), atol=1e-12)
        assert merged.energy() == pytest.approx(a.energy() + b.energy())

    def test_gap_closed_across_boundary(self) -> None:
        a = singleton(0, [0.95, 0.5], [0.0, 0.0])
        b = singleton(1, [0.05, 0.5], [0.0, 0.0])
        merged = clustergas.merge_clusters(a, b, 0, 1, 0.0, np.array([1.0, 0.0]))
        chex.assert_trees_all_close(merged.initial_positions[0], merged.initial_positions[1], atol=1e-12)
        chex.assert_trees_all_close(merged.y, np.array([0.0, 0.5]), atol=1e-12)

    def test_members_sorted_and_normal_reoriented(self) -> None:
        a = singleton(3, [0.5, 0.5], [0.0, 1.0])
        b = singleton(1, [0.5, 0.6], [0.0, 0.0])
        omega = np.array([0.0, -1.0])
        merged = clustergas.merge_clusters(a, b, 3, 1, 0.1, omega)
        assert merged.member_ids == (1, 3)
        assert merged.tree.edges == ((0, 1),)
        chex.assert_trees_all_close(merged.omegas[0], -omega)

    def test_time_order(self) -> None:
        pair = clustergas.merge_clusters(
            singleton(0, [0.2, 0.5], [1.0, 0.0]),
            singleton(1, [0.4, 0.5], [-1.0, 0.0]),
            0,
            1,
            0.1,
            np.array([-1.0, 0.0]),
        )
        with pytest.raises(clustergas.TimeOrderViolation):
            clustergas.merge_clusters(pair, singleton(2, [0.1, 0.1], [0.0, 0.0]), 0, 2, 0.05, np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            clustergas.merge_clusters(pair, pair, 0, 1, 0.2, np.array([1.0, 0.0]))


class TestTotalVariation:
    def test_bounds(self) -> None:
        a = clustergas.SizeHistogram.from_sizes([1, 1, 2], normalizer=4.0)
        b = clustergas.SizeHistogram.from_sizes([4], normalizer=4.0)
        assert clustergas.total_variation(a, a) == 0.0
        assert clustergas.total_variation(a, b) == pytest.approx(1.0)
        c = clustergas.SizeHistogram.from_sizes([1, 1, 1, 1], normalizer=4.0)
        assert clustergas.total_variation(a, c) == pytest.approx(0.5)


class TestRun:
    def test_no_merging(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        result = clustergas.coagulation_run(model, 500, 0.25, 0.1, rng, merge_kernel=0.0)
        assert result.merge_events == 0
        assert all(c.size == 1 for c in result.clusters)
        assert result.snapshots[-1].mean_size == 1.0

    def test_conservation_and_consistency(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        m = 1000
        result = clustergas.coagulation_run(model, m, 0.25, 0.2, rng, dt=0.02)
        assert result.merge_events > 0
        assert sum(c.size for c in result.clusters) == m
        energies = [s.energy for s in result.snapshots]
        assert np.allclose(energies, energies[0], rtol=1e-9)
        assert result.snapshots[-1].mean_size > 1.0
        for cluster in result.clusters:
            assert np.all(np.diff(cluster.times) >= 0.0)
            for (a, b), tau in zip(cluster.tree.edges, cluster.times):
                x, _ = cluster.unwrapped_state_at(float(tau))
                chex.assert_trees_all_close(x[a], x[b], atol=1e-9)

    def test_initial_merge_rate(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        m, window = 2000, 0.02
        result = clustergas.coagulation_run(model, m, 0.25, window, rng, dt=0.01)
        rate, err = result.merge_rate(window)
        expected = clustergas.expected_merge_rate(m, model)
        assert rate == pytest.approx(expected, abs=5 * err + 0.05 * expected)

    def test_majorant_breach_recovers(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        result = clustergas.coagulation_run(model, 500, 0.25, 0.05, rng, majorant_factor=0.05)
        assert result.breaches > 0
        assert sum(c.size for c in result.clusters) == 500

    def test_deterministic(self, model: clustergas.InitialModel) -> None:
        runs = [clustergas.coagulation_run(model, 300, 0.25, 0.1, np.random.default_rng(5)) for _ in range(2)]
        assert [c.canonical() for c in runs[0].clusters] == [c.canonical() for c in runs[1].clusters]
        assert runs[0].merge_times == runs[1].merge_times

    def test_rows(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        result = clustergas.coagulation_run(model, 300, 0.25, 0.1, rng, dt=0.05)
        assert len(result.summary_rows()) == len(result.snapshots) == 3
        rows = [r for r in result.size_rows() if r["t"] == result.snapshots[-1].t]
        assert sum(r["frequency"] for r in rows) == pytest.approx(1.0)
