"""Graph combinatorics of the cluster expansion.

Covers the alternating connected-graph sum `phi`, spanning-tree counts for the
tree inequality, and ordered (optionally signed) trees, which index the
collision and overlap orderings of cluster paths and aggregates.
"""

__all__ = [
    "EXACT_PHI_MAX_K",
    "ENUMERATION_MAX_K",
    "ORDERED_TREE_MAX_N",
    "PhiMode",
    "SimpleGraph",
    "OrderedTree",
    "SignedOrderedTree",
    "phi",
    "spanning_tree_count",
    "count_trees_with_degrees",
    "ordered_tree_count",
    "signed_ordered_tree_count",
    "enumerate_labeled_trees",
    "enumerate_ordered_trees",
    "enumerate_signed_ordered_trees",
    "enumerate_graphs",
    "sample_ordered_tree",
    "sample_signed_ordered_tree",
    "random_graph",
    "tree_inequality_holds",
]

import functools
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Literal

import networkx as nx
import numpy as np
from networkx.utils import UnionFind

from clustergas.errors import DegreeMismatch, SizeLimit

logger = logging.getLogger(__name__)

EXACT_PHI_MAX_K = 16
ENUMERATION_MAX_K = 6
ORDERED_TREE_MAX_N = 7

PhiMode = Literal["recursive", "enumerate"]

Edge = tuple[int, int]


def _edge(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class SimpleGraph:
    """Undirected graph on vertices `0..k-1` without loops or multi-edges."""

    k: int
    edges: frozenset[Edge]

    def __post_init__(self) -> None:
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"Self-loop at vertex {i}")
            if not (0 <= i < j < self.k):
                raise ValueError(f"Edge {(i, j)} is not a normalized pair of vertices below {self.k}")

    @classmethod
    def from_edges(cls, k: int, edges: Iterable[tuple[int, int]]) -> "SimpleGraph":
        return cls(k=k, edges=frozenset(_edge(i, j) for i, j in edges))

    @classmethod
    def complete(cls, k: int) -> "SimpleGraph":
        return cls.from_edges(k, itertools.combinations(range(k), 2))

    @property
    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.k, self.k), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.k))
        graph.add_edges_from(self.edges)
        return graph

    def is_connected(self) -> bool:
        return self.k <= 1 or nx.is_connected(self.to_networkx())

    def is_tree(self) -> bool:
        return self.k >= 1 and len(self.edges) == self.k - 1 and self.is_connected()


def _check_spanning_tree(n: int, edges: Iterable[Edge]) -> None:
    edges = list(edges)
    if len(edges) != max(n - 1, 0):
        raise ValueError(f"A tree on {n} vertices needs {max(n - 1, 0)} edges, got {len(edges)}")
    uf = UnionFind(range(n))
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"Invalid tree edge {(i, j)} for {n} vertices")
        if uf[i] == uf[j]:
            raise ValueError(f"Edge {(i, j)} closes a cycle")
        uf.union(i, j)


@dataclass(frozen=True)
class OrderedTree:
    """Spanning tree whose edges are listed in clustering order."""

    n: int
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        _check_spanning_tree(self.n, self.edges)

    def graph(self) -> SimpleGraph:
        return SimpleGraph.from_edges(self.n, self.edges)

    def relabel(self, mapping: dict[int, int], n: int | None = None) -> "OrderedTree":
        edges = tuple(_edge(mapping[i], mapping[j]) for i, j in self.edges)
        return OrderedTree(n=self.n if n is None else n, edges=edges)


@dataclass(frozen=True)
class SignedOrderedTree:
    """Ordered tree with a sign per edge: +1 for a collision, -1 for an overlap."""

    n: int
    edges: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        _check_spanning_tree(self.n, [(i, j) for i, j, _ in self.edges])
        if any(s not in (-1, 1) for _, _, s in self.edges):
            raise ValueError(f"Edge signs must be +1 or -1, got {[s for _, _, s in self.edges]}")

    @property
    def signs(self) -> tuple[int, ...]:
        return tuple(s for _, _, s in self.edges)

    def unsigned(self) -> OrderedTree:
        return OrderedTree(n=self.n, edges=tuple((i, j) for i, j, _ in self.edges))


def _phi_block(k: int, edges: list[Edge]) -> int:
    """Alternating connected-subgraph sum of a single biconnected block.

    Uses `conn(S) = A(S) - sum conn(S \\ U)` over nonempty independent sets `U`
    avoiding the lowest vertex of `S`, where `A(S)` is one iff `S` spans no edge.
    """
    nbr = [0] * k
    for i, j in edges:
        nbr[i] |= 1 << j
        nbr[j] |= 1 << i

    @functools.lru_cache(maxsize=None)
    def independent(mask: int) -> bool:
        rest = mask
        while rest:
            low = rest & -rest
            v = low.bit_length() - 1
            if nbr[v] & mask:
                return False
            rest ^= low
        return True

    def independent_subsets(mask: int) -> Iterator[int]:
        # Branch on the lowest vertex: skip it, or take it and drop its neighbors.
        if not mask:
            yield 0
            return
        low = mask & -mask
        v = low.bit_length() - 1
        rest = mask ^ low
        yield from independent_subsets(rest)
        for sub in independent_subsets(rest & ~nbr[v]):
            yield sub | low

    @functools.lru_cache(maxsize=None)
    def conn(mask: int) -> int:
        total = 1 if independent(mask) else 0
        low = mask & -mask
        for sub in independent_subsets(mask ^ low):
            if sub:
                total -= conn(mask ^ sub)
        return total

    return conn((1 << k) - 1)


def _phi_enumerate(g: SimpleGraph) -> int:
    edges = sorted(g.edges)
    total = 0
    for size in range(max(g.k - 1, 0), len(edges) + 1):
        for subset in itertools.combinations(edges, size):
            uf = UnionFind(range(g.k))
            for i, j in subset:
                uf.union(i, j)
            if len({uf[v] for v in range(g.k)}) == 1:
                total += -1 if size % 2 else 1
    return total


def phi(g: SimpleGraph, mode: PhiMode = "recursive") -> int:
    """Sum over connected spanning subgraphs `C` of `g` of `(-1)^|C|`.

    The `recursive` mode factorizes over biconnected blocks and runs a
    vertex-subset recursion inside each block. The `enumerate` mode sums
    directly over subsets of the present edges and is meant as a cross-check.

    Args:
        g: The graph.
        mode: Evaluation mode.

    Returns:
        The signed integer value; 1 for a single vertex.

    Raises:
        SizeLimit: If `g` exceeds the bound of the chosen mode.
    """
    match mode:
        case "recursive":
            if g.k > EXACT_PHI_MAX_K:
                raise SizeLimit(f"phi is exact up to {EXACT_PHI_MAX_K} vertices, got {g.k}")
            if g.k == 1:
                return 1
            if not g.is_connected():
                return 0
            value = 1
            graph = g.to_networkx()
            for block in nx.biconnected_components(graph):
                index = {v: n for n, v in enumerate(sorted(block))}
                sub = [(index[i], index[j]) for i, j in graph.subgraph(block).edges]
                value *= _phi_block(len(index), sub)
            return value
        case "enumerate":
            if g.k > ENUMERATION_MAX_K:
                raise SizeLimit(f"Edge-subset enumeration is limited to {ENUMERATION_MAX_K} vertices, got {g.k}")
            return _phi_enumerate(g)
        case _:
            raise ValueError(f"Unsupported phi mode: {mode}")


def _bareiss_determinant(matrix: list[list[int]]) -> int:
    m = [row[:] for row in matrix]
    n = len(m)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if m[r][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def spanning_tree_count(g: SimpleGraph, method: Literal["determinant", "enumerate"] = "determinant") -> int:
    """Number of spanning trees of `g`.

    The determinant method applies Kirchhoff's theorem with exact integer
    elimination; the enumeration method checks every `(k-1)`-edge subset.
    """
    if g.k > EXACT_PHI_MAX_K:
        raise SizeLimit(f"Spanning-tree counts are supported up to {EXACT_PHI_MAX_K} vertices, got {g.k}")
    if g.k <= 1:
        return 1
    match method:
        case "determinant":
            laplacian = [[0] * g.k for _ in range(g.k)]
            for i, j in g.edges:
                laplacian[i][i] += 1
                laplacian[j][j] += 1
                laplacian[i][j] -= 1
                laplacian[j][i] -= 1
            reduced = [row[1:] for row in laplacian[1:]]
            return _bareiss_determinant(reduced)
        case "enumerate":
            if g.k > ENUMERATION_MAX_K:
                raise SizeLimit(f"Tree enumeration is limited to {ENUMERATION_MAX_K} vertices, got {g.k}")
            count = 0
            for subset in itertools.combinations(sorted(g.edges), g.k - 1):
                if SimpleGraph(k=g.k, edges=frozenset(subset)).is_connected():
                    count += 1
            return count
        case _:
            raise ValueError(f"Unsupported method: {method}")


def count_trees_with_degrees(k: int, degrees: Iterable[int]) -> int:
    """Labeled trees on `k` vertices with the given degree sequence."""
    degrees = list(degrees)
    if len(degrees) != k:
        raise DegreeMismatch(f"Expected {k} degrees, got {len(degrees)}")
    if k == 1:
        if degrees != [0]:
            raise DegreeMismatch(f"A single vertex has degree 0, got {degrees[0]}")
        return 1
    if any(d < 1 for d in degrees) or sum(degrees) != 2 * k - 2:
        raise DegreeMismatch(f"Degrees {degrees} must be positive and sum to {2 * k - 2}")
    return math.factorial(k - 2) // math.prod(math.factorial(d - 1) for d in degrees)


def ordered_tree_count(n: int) -> int:
    if n < 1:
        raise ValueError(f"`{n=}` must be positive")
    return n ** (n - 2) * math.factorial(n - 1) if n >= 2 else 1


def signed_ordered_tree_count(n: int) -> int:
    return ordered_tree_count(n) * 2 ** (n - 1)


def _decode_prufer(n: int, sequence: Iterable[int]) -> tuple[Edge, ...]:
    if n == 1:
        return ()
    if n == 2:
        return ((0, 1),)
    tree = nx.from_prufer_sequence(list(sequence))
    return tuple(sorted(_edge(i, j) for i, j in tree.edges))


def enumerate_labeled_trees(n: int) -> Iterator[tuple[Edge, ...]]:
    """Every labeled tree on `n` vertices as a sorted edge tuple."""
    if n <= 2:
        yield _decode_prufer(n, [])
        return
    for sequence in itertools.product(range(n), repeat=n - 2):
        yield _decode_prufer(n, sequence)


def enumerate_ordered_trees(n: int) -> Iterator[OrderedTree]:
    if n > ORDERED_TREE_MAX_N:
        raise SizeLimit(f"Ordered trees are enumerated up to {ORDERED_TREE_MAX_N} vertices, got {n}")
    for edges in enumerate_labeled_trees(n):
        for order in itertools.permutations(edges):
            yield OrderedTree(n=n, edges=order)


def enumerate_signed_ordered_trees(n: int) -> Iterator[SignedOrderedTree]:
    for tree in enumerate_ordered_trees(n):
        for signs in itertools.product((1, -1), repeat=n - 1):
            yield SignedOrderedTree(n=n, edges=tuple((i, j, s) for (i, j), s in zip(tree.edges, signs)))


def enumerate_graphs(k: int) -> Iterator[SimpleGraph]:
    """Every labeled simple graph on `k` vertices."""
    if k > ENUMERATION_MAX_K:
        raise SizeLimit(f"Graph enumeration is limited to {ENUMERATION_MAX_K} vertices, got {k}")
    pairs = list(itertools.combinations(range(k), 2))
    for mask in range(1 << len(pairs)):
        yield SimpleGraph(k=k, edges=frozenset(p for b, p in enumerate(pairs) if mask >> b & 1))


def sample_ordered_tree(n: int, rng: np.random.Generator) -> OrderedTree:
    """Uniform ordered tree: random Prüfer sequence, then a random edge order."""
    sequence = rng.integers(0, n, size=max(n - 2, 0)).tolist()
    edges = _decode_prufer(n, sequence)
    order = rng.permutation(len(edges))
    return OrderedTree(n=n, edges=tuple(edges[k] for k in order))


def sample_signed_ordered_tree(n: int, rng: np.random.Generator) -> SignedOrderedTree:
    tree = sample_ordered_tree(n, rng)
    signs = rng.choice(np.array([1, -1]), size=n - 1)
    return SignedOrderedTree(n=n, edges=tuple((i, j, int(s)) for (i, j), s in zip(tree.edges, signs)))


def random_graph(k: int, p: float, rng: np.random.Generator) -> SimpleGraph:
    """Erdős–Rényi graph with edge probability `p`."""
    pairs = list(itertools.combinations(range(k), 2))
    keep = rng.random(len(pairs)) < p
    return SimpleGraph(k=k, edges=frozenset(pair for pair, flag in zip(pairs, keep) if flag))


def tree_inequality_holds(g: SimpleGraph) -> bool:
    return abs(phi(g)) <= spanning_tree_count(g)
