"""Tests for graph and tree combinatorics."""

import math
from collections import Counter

import numpy as np
import pytest

import clustergas
from clustergas import SimpleGraph


def cycle(k: int) -> SimpleGraph:
    return SimpleGraph.from_edges(k, [(i, (i + 1) % k) for i in range(k)])


class TestSimpleGraph:
    def test_normalizes_edges(self) -> None:
        g = SimpleGraph.from_edges(3, [(2, 0), (1, 2)])
        assert g.edges == frozenset({(0, 2), (1, 2)})
        assert g.is_connected() and g.is_tree()

    def test_rejects_bad_edges(self) -> None:
        with pytest.raises(ValueError):
            SimpleGraph.from_edges(2, [(1, 1)])
        with pytest.raises(ValueError):
            SimpleGraph.from_edges(2, [(0, 2)])

    def test_ordered_tree_validation(self) -> None:
        with pytest.raises(ValueError):
            clustergas.OrderedTree(n=3, edges=((0, 1), (0, 1)))
        with pytest.raises(ValueError):
            clustergas.OrderedTree(n=3, edges=((0, 1),))
        with pytest.raises(ValueError):
            clustergas.SignedOrderedTree(n=2, edges=((0, 1, 0),))


class TestPhi:
    def test_small_values(self) -> None:
        assert clustergas.phi(SimpleGraph(k=1, edges=frozenset())) == 1
        assert clustergas.phi(SimpleGraph.from_edges(2, [(0, 1)])) == -1
        assert clustergas.phi(SimpleGraph(k=2, edges=frozenset())) == 0
        assert clustergas.phi(cycle(3)) == 2

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
    def test_complete_graph(self, k: int) -> None:
        assert clustergas.phi(SimpleGraph.complete(k)) == clustergas.phi_complete(k)

    @pytest.mark.parametrize("k", [3, 4, 5, 6, 8])
    def test_cycle(self, k: int) -> None:
        """A k-cycle has k spanning trees plus itself: phi = (-1)^k (1 - k)."""
        assert clustergas.phi(cycle(k)) == (-1) ** (k - 1) * k + (-1) ** k

    @pytest.mark.parametrize("k", [2, 3, 4, 5])
    def test_trees_and_inequality(self, k: int) -> None:
        for g in clustergas.enumerate_graphs(k):
            value = clustergas.phi(g)
            assert value == clustergas.phi(g, mode="enumerate")
            if not g.is_connected():
                assert value == 0
                continue
            if g.is_tree():
                assert value == (-1) ** (k - 1)
            assert abs(value) <= clustergas.spanning_tree_count(g)

    def test_recursion_on_random_graphs(self, rng: np.random.Generator) -> None:
        for _ in range(30):
            g = clustergas.random_graph(int(rng.integers(2, 10)), float(rng.uniform(0.2, 0.8)), rng)
            if g.is_connected():
                assert clustergas.tree_inequality_holds(g)

    def test_size_limits(self) -> None:
        with pytest.raises(clustergas.SizeLimit):
            clustergas.phi(SimpleGraph.complete(17))
        with pytest.raises(clustergas.SizeLimit):
            clustergas.phi(SimpleGraph.complete(7), mode="enumerate")
        with pytest.raises(clustergas.SizeLimit):
            next(clustergas.enumerate_graphs(7))


class TestCounts:
    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
    def test_cayley(self, k: int) -> None:
        assert sum(1 for _ in clustergas.enumerate_labeled_trees(k)) == clustergas.cayley_count(k)
        complete = SimpleGraph.complete(k)
        assert clustergas.spanning_tree_count(complete) == clustergas.cayley_count(k)
        assert clustergas.spanning_tree_count(complete, method="enumerate") == clustergas.cayley_count(k)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_ordered_trees(self, n: int) -> None:
        trees = list(clustergas.enumerate_ordered_trees(n))
        assert len(trees) == clustergas.ordered_tree_count(n)
        assert len(set(trees)) == len(trees)
        signed = sum(1 for _ in clustergas.enumerate_signed_ordered_trees(n))
        assert signed == clustergas.signed_ordered_tree_count(n)

    def test_degree_counts(self) -> None:
        assert clustergas.count_trees_with_degrees(4, [3, 1, 1, 1]) == 1
        assert clustergas.count_trees_with_degrees(4, [2, 2, 1, 1]) == 2
        total = sum(
            clustergas.count_trees_with_degrees(5, degrees)
            for degrees in np.ndindex(*(5,) * 5)
            if all(d >= 1 for d in degrees) and sum(degrees) == 8
        )
        assert total == clustergas.cayley_count(5)
        with pytest.raises(clustergas.DegreeMismatch):
            clustergas.count_trees_with_degrees(3, [1, 1, 1])
        with pytest.raises(clustergas.DegreeMismatch):
            clustergas.count_trees_with_degrees(3, [2, 2])

    def test_relabel(self) -> None:
        tree = clustergas.OrderedTree(n=3, edges=((0, 1), (1, 2)))
        relabeled = tree.relabel({0: 2, 1: 0, 2: 1})
        assert relabeled.edges == ((0, 2), (0, 1))


class TestSampling:
    def test_uniform_ordered_trees(self, rng: np.random.Generator) -> None:
        n, draws = 3, 6000
        counts = Counter(clustergas.sample_ordered_tree(n, rng) for _ in range(draws))
        assert len(counts) == clustergas.ordered_tree_count(n)
        expected = draws / clustergas.ordered_tree_count(n)
        assert all(abs(c - expected) < 5 * math.sqrt(expected) for c in counts.values())

    def test_signed_trees(self, rng: np.random.Generator) -> None:
        signs = np.concatenate([clustergas.sample_signed_ordered_tree(5, rng).signs for _ in range(500)])
        assert set(signs.tolist()) == {-1, 1}
        assert abs(signs.mean()) < 0.1
        assert clustergas.sample_signed_ordered_tree(1, rng).n == 1
