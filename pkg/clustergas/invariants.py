"""Defines the invariant checks run against finished molecular-dynamics runs.

Each check inspects a `RunRecord` and returns a list of human-readable
violations; an empty list means the run passed.
"""

__all__ = [
    "InvariantCheck",
    "EnergyConservation",
    "MomentumConservation",
    "HardCoreCheck",
    "CollisionLogConsistency",
    "TrajectoryContinuity",
    "PartitionOfUnity",
    "default_checks",
    "check_run",
    "assert_invariants",
]

import functools
import logging
from abc import ABC, abstractmethod
from typing import Sequence

import attrs
import numpy as np
import xax

from clustergas.clusters import InteractionGraph, detect_overlaps, partition_cluster_paths
from clustergas.errors import InvariantViolation
from clustergas.geometry import torus_distance
from clustergas.types import RunRecord

logger = logging.getLogger(__name__)


@attrs.define(frozen=True, kw_only=True)
class InvariantCheck(ABC):
    """Base class for invariant checks."""

    @abstractmethod
    def __call__(self, record: RunRecord) -> list[str]:
        """Returns the violations found in the run."""

    def get_name(self) -> str:
        return xax.camelcase_to_snakecase(self.__class__.__name__)

    @functools.cached_property
    def check_name(self) -> str:
        return self.get_name()


@attrs.define(frozen=True, kw_only=True)
class EnergyConservation(InvariantCheck):
    """Relative drift of total kinetic energy between time zero and the horizon."""

    rtol: float = attrs.field(default=1e-9)

    def __call__(self, record: RunRecord) -> list[str]:
        e0 = record.config.kinetic_energy()
        e1 = record.final_configuration().kinetic_energy()
        drift = abs(e1 - e0) / max(e0, 1e-300)
        if drift > self.rtol:
            return [f"Energy drifted by {drift:.3e} (from {e0!r} to {e1!r})"]
        return []


@attrs.define(frozen=True, kw_only=True)
class MomentumConservation(InvariantCheck):
    """Momentum drift, relative to the total speed of the configuration."""

    rtol: float = attrs.field(default=1e-9)

    def __call__(self, record: RunRecord) -> list[str]:
        p0 = record.config.momentum()
        p1 = record.final_configuration().momentum()
        scale = max(float(np.linalg.norm(record.config.velocities, axis=-1).sum()), 1e-300)
        drift = float(np.linalg.norm(p1 - p0)) / scale
        if drift > self.rtol:
            return [f"Momentum drifted by {drift:.3e}"]
        return []


@attrs.define(frozen=True, kw_only=True)
class HardCoreCheck(InvariantCheck):
    """No pair closer than `eps` at any trajectory breakpoint or between two consecutive ones."""

    rtol: float = attrs.field(default=1e-6)

    def __call__(self, record: RunRecord) -> list[str]:
        violations = []
        breakpoints = [np.array([0.0, record.horizon])] + [tr.times for tr in record.trajectories]
        times = np.unique(np.concatenate(breakpoints))
        times = times[times <= record.horizon]
        for t in np.sort(np.concatenate([times, 0.5 * (times[1:] + times[:-1])])):
            state = record.state_at(float(t))
            if not state.satisfies_hard_core(self.rtol):
                violations.append(f"Separation {state.min_separation():.6e} below eps={state.eps} at t={t:.6f}")
        return violations


@attrs.define(frozen=True, kw_only=True)
class CollisionLogConsistency(InvariantCheck):
    """Logged collisions are time-ordered, incoming, at contact, and conservative."""

    atol: float = attrs.field(default=1e-9)

    def __call__(self, record: RunRecord) -> list[str]:
        violations = []
        eps = record.config.eps
        last = 0.0
        for k, event in enumerate(record.log):
            if event.t < last or event.t > record.horizon:
                violations.append(f"Collision {k} at t={event.t} is out of order")
            last = event.t
            if abs(float(np.linalg.norm(event.omega)) - 1.0) > self.atol:
                violations.append(f"Collision {k} has a non-unit normal")
            if float(np.dot(event.pre_i - event.pre_j, event.omega)) >= 0.0:
                violations.append(f"Collision {k} between {event.pair} is not incoming")
            if np.linalg.norm((event.pre_i + event.pre_j) - (event.post_i + event.post_j)) > self.atol:
                violations.append(f"Collision {k} does not conserve momentum")
            before = np.sum(event.pre_i**2) + np.sum(event.pre_j**2)
            after = np.sum(event.post_i**2) + np.sum(event.post_j**2)
            if abs(before - after) > self.atol * max(1.0, before):
                violations.append(f"Collision {k} does not conserve energy")
            xi = record.trajectories[event.i].position_at(event.t)
            xj = record.trajectories[event.j].position_at(event.t)
            gap = abs(torus_distance(xi, xj) - eps)
            if gap > eps * 1e-6:
                violations.append(f"Collision {k} occurs at distance off by {gap:.3e} from eps")
        return violations


@attrs.define(frozen=True, kw_only=True)
class TrajectoryContinuity(InvariantCheck):
    """Each recorded breakpoint is the free flight of the previous one."""

    atol: float = attrs.field(default=1e-9)

    def __call__(self, record: RunRecord) -> list[str]:
        violations = []
        for tr in record.trajectories:
            if tr.start != 0.0 or tr.end != record.horizon:
                violations.append(f"Trajectory {tr.particle_id} spans [{tr.start}, {tr.end}]")
            if np.any(np.diff(tr.times) < 0.0):
                violations.append(f"Trajectory {tr.particle_id} has decreasing breakpoint times")
            for k in range(len(tr.times) - 1):
                moved = tr.positions[k] + (tr.times[k + 1] - tr.times[k]) * tr.velocities[k]
                if torus_distance(moved, tr.positions[k + 1]) > self.atol:
                    violations.append(f"Trajectory {tr.particle_id} jumps at t={tr.times[k + 1]}")
        return violations


@attrs.define(frozen=True, kw_only=True)
class PartitionOfUnity(InvariantCheck):
    """Cluster paths are disjoint, exhaustive, collision-closed and overlap-free.

    Uniqueness is checked by partitioning again from the reversed log and
    comparing member sets.
    """

    def __call__(self, record: RunRecord) -> list[str]:
        violations = []
        n = record.config.n
        graph = InteractionGraph.from_log(record.log, n)
        paths = partition_cluster_paths(graph, record.trajectories)
        owner: dict[int, int] = {}
        for k, path in enumerate(paths):
            for pid in path.member_ids:
                if pid in owner:
                    violations.append(f"Particle {pid} belongs to paths {owner[pid]} and {k}")
                owner[pid] = k
        if sorted(owner) != list(range(n)):
            violations.append(f"Partition covers {len(owner)} of {n} particles")
        for event in record.log:
            if owner.get(event.i) != owner.get(event.j):
                violations.append(f"Collision {event.pair} at t={event.t} crosses cluster paths")

        reversed_graph = InteractionGraph(n=n, edges=tuple(reversed(graph.edges)))
        again = {p.member_ids for p in partition_cluster_paths(reversed_graph, record.trajectories)}
        if again != {p.member_ids for p in paths}:
            violations.append("Partition depends on the order of the collision log")

        overlaps = detect_overlaps(paths, record.config.eps, (0.0, record.horizon))
        for edge in overlaps.edges:
            violations.append(f"Cluster paths {edge.paths} overlap at t={edge.tau} through particles {edge.particles}")
        return violations


def default_checks() -> list[InvariantCheck]:
    return [
        EnergyConservation(),
        MomentumConservation(),
        HardCoreCheck(),
        CollisionLogConsistency(),
        TrajectoryContinuity(),
        PartitionOfUnity(),
    ]


def check_run(record: RunRecord, checks: Sequence[InvariantCheck] | None = None) -> dict[str, list[str]]:
    """Runs every check and returns the violations keyed by check name."""
    results = {}
    for check in default_checks() if checks is None else checks:
        violations = check(record)
        if violations:
            logger.warning("Run %d failed %s: %s", record.run_id, check.check_name, violations[0])
        results[check.check_name] = violations
    return results


def assert_invariants(record: RunRecord, checks: Sequence[InvariantCheck] | None = None) -> None:
    failed = {name: v for name, v in check_run(record, checks).items() if v}
    if failed:
        summary = "; ".join(f"{name}: {v[0]}" for name, v in failed.items())
        raise InvariantViolation(f"Run {record.run_id} violated {len(failed)} invariant(s): {summary}")
