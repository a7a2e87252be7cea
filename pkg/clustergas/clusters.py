"""Cluster paths, overlaps and aggregates.

A run's collision log defines an interaction multigraph; its connected
components are the cluster paths. Cluster paths that do not come from the
same run may still overlap, meaning two of their members come within one
diameter; the overlap graph over a family of paths decides whether they form
an aggregate.
"""

__all__ = [
    "InteractionGraph",
    "ClusterPath",
    "OverlapEdge",
    "OverlapGraph",
    "AggregateConnectivity",
    "DecoratedTreeParams",
    "partition_cluster_paths",
    "classify_minimal",
    "detect_overlaps",
    "aggregate_connectivity",
    "aggregate_components",
    "extract_tree_parameters",
    "cluster_summary_rows",
    "cluster_size_law",
    "size_histogram",
    "largest_cluster_fraction",
    "mean_cluster_size",
]

import collections
import functools
import itertools
import logging
from dataclasses import dataclass, replace
from typing import Any, Sequence

import networkx as nx
import numpy as np
from jaxtyping import Float
from networkx.utils import UnionFind

from clustergas.geometry import first_contact_time, torus_distance, wrap
from clustergas.trees import OrderedTree, SimpleGraph
from clustergas.types import CollisionLog, CollisionRecord, SizeHistogram, TrajectorySet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InteractionGraph:
    """Timestamped collision multigraph of one run."""

    n: int
    edges: tuple[CollisionRecord, ...]

    @classmethod
    def from_log(cls, log: CollisionLog, n: int) -> "InteractionGraph":
        return cls(n=n, edges=tuple(log.events))

    def to_networkx(self) -> nx.MultiGraph:
        graph = nx.MultiGraph()
        graph.add_nodes_from(range(self.n))
        for edge in self.edges:
            graph.add_edge(edge.i, edge.j, t=edge.t)
        return graph


@dataclass(frozen=True)
class DecoratedTreeParams:
    """Tree coordinates of a minimal cluster path.

    `omegas[e]` is `(x_a - x_b) / eps` at `times[e]` for the tree edge
    `(a, b)`, `a < b`. `y` is the time-zero center of mass on the torus.
    """

    n: int
    tree: OrderedTree
    y: Float[np.ndarray, " d"]
    velocities: Float[np.ndarray, "n d"]
    times: Float[np.ndarray, " e"]
    omegas: Float[np.ndarray, "e d"]

    def __post_init__(self) -> None:
        if self.tree.n != self.n or self.velocities.shape[0] != self.n:
            raise ValueError(f"Tree on {self.tree.n} vertices and {self.velocities.shape[0]} velocities for n={self.n}")
        if len(self.times) != self.n - 1 or len(self.omegas) != self.n - 1:
            raise ValueError(f"Expected {self.n - 1} times and deflections")
        if len(self.times) and (self.times[0] <= 0.0 or np.any(np.diff(self.times) <= 0.0)):
            raise ValueError(f"Collision times {self.times} must be positive and strictly increasing")
        if len(self.omegas) and not np.allclose(np.linalg.norm(self.omegas, axis=-1), 1.0, atol=1e-9):
            raise ValueError("Deflection vectors must have unit length")

    @property
    def dim(self) -> int:
        return self.velocities.shape[1]


@dataclass(frozen=True)
class ClusterPath:
    """Connected component of a run's interaction graph.

    The clustering edges are the collisions kept by scanning the component's
    edges in time order and skipping any that would close a cycle; the
    skipped ones are recollisions.
    """

    member_ids: tuple[int, ...]
    trajectories: TrajectorySet
    clustering_edges: tuple[CollisionRecord, ...]
    recollision_edges: tuple[CollisionRecord, ...]

    @property
    def size(self) -> int:
        return len(self.member_ids)

    @property
    def is_minimal(self) -> bool:
        return not self.recollision_edges

    @property
    def edges(self) -> tuple[CollisionRecord, ...]:
        return tuple(sorted(self.clustering_edges + self.recollision_edges, key=lambda e: (e.t, e.pair)))

    @functools.cached_property
    def local_index(self) -> dict[int, int]:
        return {pid: k for k, pid in enumerate(self.member_ids)}

    @functools.cached_property
    def clustering_tree(self) -> OrderedTree:
        idx = self.local_index
        return OrderedTree(n=self.size, edges=tuple(_sorted_pair(idx[e.i], idx[e.j]) for e in self.clustering_edges))

    def energy_at(self, t: float) -> float:
        return 0.5 * float(np.sum(self.trajectories.velocities_at(t) ** 2))

    @property
    def energy(self) -> float:
        return self.energy_at(0.0)

    def unwrapped_initial_positions(self, eps: float) -> Float[np.ndarray, "n d"]:
        """Time-zero positions laid out in R^d so that each clustering contact is at distance `eps`.

        Positions are propagated along the clustering tree from the first
        member, which keeps its torus coordinates.
        """
        idx = self.local_index
        out = np.zeros((self.size, self.trajectories[0].positions.shape[1]))
        out[0] = self.trajectories[0].positions[0]
        placed = {0}
        adjacency: dict[int, list[CollisionRecord]] = {}
        for e in self.clustering_edges:
            adjacency.setdefault(idx[e.i], []).append(e)
            adjacency.setdefault(idx[e.j], []).append(e)
        stack = [0]
        while stack:
            a = stack.pop()
            for e in adjacency.get(a, []):
                b = idx[e.j] if idx[e.i] == a else idx[e.i]
                if b in placed:
                    continue
                # Contact normal points from the j-particle to the i-particle.
                offset = eps * e.omega if idx[e.i] == b else -eps * e.omega
                x_a_at_t = out[a] + self.trajectories[a].displacement(0.0, e.t)
                out[b] = x_a_at_t + offset - self.trajectories[b].displacement(0.0, e.t)
                placed.add(b)
                stack.append(b)
        return out

    def root(self, eps: float) -> Float[np.ndarray, " d"]:
        return wrap(self.unwrapped_initial_positions(eps).mean(axis=0))


def _sorted_pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def partition_cluster_paths(graph: InteractionGraph, trajectories: TrajectorySet) -> tuple[ClusterPath, ...]:
    """Splits a run into its cluster paths, ordered by lowest member id."""
    uf = UnionFind(range(graph.n))
    for edge in graph.edges:
        uf.union(edge.i, edge.j)
    groups: dict[int, list[int]] = {}
    for pid in range(graph.n):
        groups.setdefault(uf[pid], []).append(pid)
    edges_by_root: dict[int, list[CollisionRecord]] = {}
    for edge in sorted(graph.edges, key=lambda e: (e.t, e.pair)):
        edges_by_root.setdefault(uf[edge.i], []).append(edge)

    paths = []
    for root, members in sorted(groups.items(), key=lambda item: min(item[1])):
        local = UnionFind(members)
        clustering, recollision = [], []
        for edge in edges_by_root.get(root, []):
            if local[edge.i] == local[edge.j]:
                recollision.append(edge)
            else:
                local.union(edge.i, edge.j)
                clustering.append(edge)
        paths.append(
            ClusterPath(
                member_ids=tuple(members),
                trajectories=trajectories.subset(members),
                clustering_edges=tuple(clustering),
                recollision_edges=tuple(recollision),
            )
        )
    return tuple(paths)


def classify_minimal(path: ClusterPath) -> tuple[bool, OrderedTree]:
    """Returns whether the path's collision graph is a simple tree, and its clustering tree."""
    return path.is_minimal, path.clustering_tree


@dataclass(frozen=True)
class OverlapEdge:
    tau: float
    paths: tuple[int, int]
    particles: tuple[int, int]
    omega: Float[np.ndarray, " d"]
    at_start: bool


@dataclass(frozen=True)
class OverlapGraph:
    k: int
    edges: tuple[OverlapEdge, ...]

    @property
    def time_zero_edges(self) -> tuple[OverlapEdge, ...]:
        return tuple(e for e in self.edges if e.at_start)

    def graph(self) -> SimpleGraph:
        return SimpleGraph.from_edges(self.k, (e.paths for e in self.edges))


def _bounding_ball(path: ClusterPath, t0: float) -> tuple[np.ndarray, float, float]:
    positions = path.trajectories.positions_at(t0)
    center = positions[0]
    radius = max(torus_distance(center, x) for x in positions)
    speed = max(tr.max_speed() for tr in path.trajectories)
    return center, radius, speed


def detect_overlaps(
    paths: Sequence[ClusterPath],
    eps: float,
    window: tuple[float, float],
) -> OverlapGraph:
    """Earliest sub-diameter approach between every pair of cluster paths.

    Pairs whose bounding balls cannot meet within the window are skipped
    before any member pair is examined.

    Args:
        paths: The cluster paths, possibly from different realizations.
        eps: Sphere diameter.
        window: Time interval to scan.

    Returns:
        One overlap edge per overlapping pair of paths, at the infimum time.
    """
    t0, t1 = window
    balls = [_bounding_ball(p, t0) for p in paths]
    edges = []
    for p, q in itertools.combinations(range(len(paths)), 2):
        (cp, rp, sp), (cq, rq, sq) = balls[p], balls[q]
        if torus_distance(cp, cq) > rp + rq + eps + (sp + sq) * (t1 - t0):
            continue
        best: tuple[float, int, int, np.ndarray] | None = None
        for a, tr_a in enumerate(paths[p].trajectories):
            for b, tr_b in enumerate(paths[q].trajectories):
                contact = first_contact_time(tr_a, tr_b, eps, window)
                if contact is None:
                    continue
                if best is None or contact.t < best[0]:
                    best = (contact.t, a, b, contact.omega)
        if best is None:
            continue
        tau, a, b, omega = best
        edges.append(
            OverlapEdge(
                tau=tau,
                paths=(p, q),
                particles=(paths[p].member_ids[a], paths[q].member_ids[b]),
                omega=omega,
                at_start=tau <= t0,
            )
        )
    return OverlapGraph(k=len(paths), edges=tuple(edges))


@dataclass(frozen=True)
class AggregateConnectivity:
    connected: bool
    is_min_aggregate: bool
    overlap_tree: OrderedTree | None

    @property
    def phi_min(self) -> int:
        """Sign carried by a minimal aggregate, zero otherwise."""
        if not self.is_min_aggregate or self.overlap_tree is None:
            return 0
        return -1 if (self.overlap_tree.n - 1) % 2 else 1


def aggregate_connectivity(og: OverlapGraph) -> AggregateConnectivity:
    graph = og.graph()
    connected = graph.is_connected()
    minimal = connected and len(og.edges) == og.k - 1 and not og.time_zero_edges
    tree = None
    if minimal:
        ordered = sorted(og.edges, key=lambda e: (e.tau, e.paths))
        tree = OrderedTree(n=og.k, edges=tuple(e.paths for e in ordered))
    return AggregateConnectivity(connected=connected, is_min_aggregate=minimal, overlap_tree=tree)


def aggregate_components(og: OverlapGraph) -> list[OverlapGraph]:
    """Splits an overlap graph into its connected families of at least two paths, relabeled from zero."""
    graph = nx.Graph()
    graph.add_nodes_from(range(og.k))
    graph.add_edges_from(e.paths for e in og.edges)
    components = []
    for nodes in sorted((sorted(c) for c in nx.connected_components(graph) if len(c) > 1), key=lambda c: c[0]):
        idx = {p: k for k, p in enumerate(nodes)}
        edges = tuple(
            replace(e, paths=(idx[e.paths[0]], idx[e.paths[1]])) for e in og.edges if e.paths[0] in idx
        )
        components.append(OverlapGraph(k=len(nodes), edges=edges))
    return components


def extract_tree_parameters(path: ClusterPath, eps: float) -> DecoratedTreeParams:
    """Reads the tree coordinates off a minimal cluster path.

    Raises:
        ValueError: If the path contains recollisions.
    """
    if not path.is_minimal:
        raise ValueError(f"Cluster path {path.member_ids} has {len(path.recollision_edges)} recollisions")
    idx = path.local_index
    times, omegas = [], []
    for e in path.clustering_edges:
        times.append(e.t)
        omegas.append(e.omega if idx[e.i] < idx[e.j] else -e.omega)
    dim = path.trajectories[0].positions.shape[1]
    return DecoratedTreeParams(
        n=path.size,
        tree=path.clustering_tree,
        y=path.root(eps),
        velocities=np.stack([tr.velocities[0] for tr in path.trajectories]),
        times=np.array(times, dtype=np.float64),
        omegas=np.array(omegas, dtype=np.float64).reshape(len(times), dim),
    )


def cluster_summary_rows(run_id: int, paths: Sequence[ClusterPath]) -> list[dict[str, Any]]:
    return [
        {
            "run_id": run_id,
            "path_id": k,
            "size": p.size,
            "minimal": int(p.is_minimal),
            "n_recollisions": len(p.recollision_edges),
            "energy": p.energy,
        }
        for k, p in enumerate(paths)
    ]


def cluster_size_law(paths: Sequence[ClusterPath], normalizer: float) -> SizeHistogram:
    return SizeHistogram.from_sizes([p.size for p in paths], normalizer=normalizer)


def size_histogram(paths: Sequence[ClusterPath]) -> list[dict[str, int]]:
    """Number of cluster paths of each size, one row per size present."""
    counts = collections.Counter(p.size for p in paths)
    return [{"size": size, "count": counts[size]} for size in sorted(counts)]


def largest_cluster_fraction(paths: Sequence[ClusterPath]) -> float:
    total = sum(p.size for p in paths)
    return max((p.size for p in paths), default=0) / total if total else 0.0


def mean_cluster_size(paths: Sequence[ClusterPath]) -> float:
    return sum(p.size for p in paths) / len(paths) if paths else 0.0

