"""Tests for cluster paths, overlaps and aggregates."""

import chex
import numpy as np
import pytest

import clustergas


def run_paths(
    positions: list[list[float]],
    velocities: list[list[float]],
    eps: float,
    horizon: float,
) -> tuple[clustergas.ClusterPath, ...]:
    config = clustergas.Configuration(positions=np.array(positions), velocities=np.array(velocities), eps=eps)
    record = clustergas.EventDrivenEngine().run(config, horizon)
    graph = clustergas.InteractionGraph.from_log(record.log, config.n)
    return clustergas.partition_cluster_paths(graph, record.trajectories)


@pytest.fixture
def chain() -> tuple[clustergas.ClusterPath, ...]:
    """A moving sphere knocks a second into a third; a fourth stays put."""
    return run_paths(
        [[0.2, 0.5], [0.4, 0.5], [0.6, 0.5], [0.2, 0.1]],
        [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        eps=0.1,
        horizon=0.3,
    )


class TestPartition:
    def test_components(self, chain: tuple[clustergas.ClusterPath, ...]) -> None:
        assert [p.member_ids for p in chain] == [(0, 1, 2), (3,)]
        assert [p.size for p in chain] == [3, 1]
        assert chain[0].is_minimal and chain[1].is_minimal
        assert [e.t for e in chain[0].clustering_edges] == pytest.approx([0.1, 0.2], abs=1e-12)
        assert chain[0].clustering_tree.edges == ((0, 1), (1, 2))

    def test_energy(self, chain: tuple[clustergas.ClusterPath, ...]) -> None:
        assert chain[0].energy == pytest.approx(0.5)
        assert chain[0].energy_at(0.25) == pytest.approx(0.5)
        assert chain[1].energy == 0.0

    def test_recollisions(self) -> None:
        """A pair in a box barely wider than a diameter keeps colliding through the boundary."""
        (path,) = run_paths([[0.2, 0.5], [0.7, 0.5]], [[3.0, 0.0], [-3.0, 0.0]], eps=0.45, horizon=0.1)
        assert path.size == 2
        assert len(path.clustering_edges) == 1
        assert len(path.recollision_edges) >= 2
        assert not path.is_minimal
        minimal, tree = clustergas.classify_minimal(path)
        assert not minimal
        assert tree.edges == ((0, 1),)
        with pytest.raises(ValueError):
            clustergas.extract_tree_parameters(path, 0.45)

    def test_summary_helpers(self, chain: tuple[clustergas.ClusterPath, ...]) -> None:
        rows = clustergas.cluster_summary_rows(7, chain)
        assert [r["size"] for r in rows] == [3, 1]
        assert all(r["run_id"] == 7 for r in rows)
        assert clustergas.largest_cluster_fraction(chain) == pytest.approx(0.75)
        assert clustergas.mean_cluster_size(chain) == pytest.approx(2.0)
        assert clustergas.size_histogram(chain) == [{"size": 1, "count": 1}, {"size": 3, "count": 1}]
        law = clustergas.cluster_size_law(chain, normalizer=4.0)
        chex.assert_trees_all_close(law.measure(), np.array([0.0, 0.25, 0.0, 0.25]))
        chex.assert_trees_all_close(law.particle_fraction(), np.array([0.0, 0.25, 0.0, 0.75]))


class TestTreeParameters:
    def test_chain(self, chain: tuple[clustergas.ClusterPath, ...]) -> None:
        params = clustergas.extract_tree_parameters(chain[0], 0.1)
        assert params.n == 3
        assert params.dim == 2
        chex.assert_trees_all_close(params.times, np.array([0.1, 0.2]), atol=1e-12)
        # Each contact has the lower-indexed sphere on the left.
        chex.assert_trees_all_close(params.omegas, np.array([[-1.0, 0.0], [-1.0, 0.0]]), atol=1e-9)
        chex.assert_trees_all_close(params.velocities, np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]))
        chex.assert_trees_all_close(params.y, np.array([0.4, 0.5]), atol=1e-9)

    def test_unwrapped_positions_across_boundary(self) -> None:
        (path,) = run_paths([[0.95, 0.5], [0.15, 0.5]], [[1.0, 0.0], [0.0, 0.0]], eps=0.1, horizon=0.2)
        unwrapped = path.unwrapped_initial_positions(0.1)
        chex.assert_trees_all_close(unwrapped[1] - unwrapped[0], np.array([0.2, 0.0]), atol=1e-9)
        chex.assert_trees_all_close(path.root(0.1), np.array([0.05, 0.5]), atol=1e-9)

    def test_validation(self) -> None:
        tree = clustergas.OrderedTree(n=2, edges=((0, 1),))
        with pytest.raises(ValueError):
            clustergas.DecoratedTreeParams(
                n=2,
                tree=tree,
                y=np.zeros(2),
                velocities=np.zeros((2, 2)),
                times=np.array([0.0]),
                omegas=np.array([[1.0, 0.0]]),
            )
        with pytest.raises(ValueError):
            clustergas.DecoratedTreeParams(
                n=2,
                tree=tree,
                y=np.zeros(2),
                velocities=np.zeros((2, 2)),
                times=np.array([0.5]),
                omegas=np.array([[2.0, 0.0]]),
            )


class TestOverlaps:
    def test_pair_from_independent_runs(self) -> None:
        (p,) = run_paths([[0.2, 0.5]], [[1.0, 0.0]], eps=0.1, horizon=0.5)
        (q,) = run_paths([[0.5, 0.5]], [[0.0, 0.0]], eps=0.1, horizon=0.5)
        (r,) = run_paths([[0.5, 0.1]], [[0.0, 0.0]], eps=0.1, horizon=0.5)

        og = clustergas.detect_overlaps([p, q], 0.1, (0.0, 0.5))
        assert len(og.edges) == 1
        edge = og.edges[0]
        assert edge.tau == pytest.approx(0.2, abs=1e-12)
        assert edge.paths == (0, 1)
        assert not edge.at_start
        chex.assert_trees_all_close(edge.omega, np.array([-1.0, 0.0]), atol=1e-9)

        conn = clustergas.aggregate_connectivity(og)
        assert conn.connected and conn.is_min_aggregate
        assert conn.phi_min == -1
        assert conn.overlap_tree is not None and conn.overlap_tree.edges == ((0, 1),)

        og3 = clustergas.detect_overlaps([p, q, r], 0.1, (0.0, 0.5))
        assert len(og3.edges) == 1
        assert not clustergas.aggregate_connectivity(og3).connected

    def test_time_zero_overlap_is_not_minimal(self) -> None:
        (p,) = run_paths([[0.2, 0.5]], [[0.0, 0.0]], eps=0.1, horizon=0.5)
        (q,) = run_paths([[0.25, 0.5]], [[0.0, 0.0]], eps=0.1, horizon=0.5)
        og = clustergas.detect_overlaps([p, q], 0.1, (0.0, 0.5))
        assert len(og.time_zero_edges) == 1
        conn = clustergas.aggregate_connectivity(og)
        assert conn.connected
        assert not conn.is_min_aggregate
        assert conn.phi_min == 0

    def test_aggregate_components(self) -> None:
        (p,) = run_paths([[0.2, 0.5]], [[1.0, 0.0]], eps=0.1, horizon=0.5)
        (r,) = run_paths([[0.5, 0.1]], [[0.0, 0.0]], eps=0.1, horizon=0.5)
        (q,) = run_paths([[0.5, 0.5]], [[0.0, 0.0]], eps=0.1, horizon=0.5)
        (s,) = run_paths([[0.8, 0.8]], [[0.0, 0.0]], eps=0.1, horizon=0.5)
        (u,) = run_paths([[0.85, 0.8]], [[0.0, 0.0]], eps=0.1, horizon=0.5)
        og = clustergas.detect_overlaps([p, r, q, s, u], 0.1, (0.0, 0.5))
        moving, resting = clustergas.aggregate_components(og)
        assert (moving.k, resting.k) == (2, 2)
        assert [e.paths for e in moving.edges] == [(0, 1)] == [e.paths for e in resting.edges]
        assert clustergas.aggregate_connectivity(moving).is_min_aggregate
        assert not clustergas.aggregate_connectivity(resting).is_min_aggregate

    def test_distant_paths_do_not_overlap(self) -> None:
        (p,) = run_paths([[0.2, 0.2]], [[0.1, 0.0]], eps=0.05, horizon=1.0)
        (q,) = run_paths([[0.2, 0.7]], [[-0.1, 0.0]], eps=0.05, horizon=1.0)
        og = clustergas.detect_overlaps([p, q], 0.05, (0.0, 1.0))
        assert og.edges == ()
