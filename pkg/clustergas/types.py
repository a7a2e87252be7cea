"""Base record types shared by the simulation, cluster and estimator layers."""

__all__ = [
    "PhasePoint",
    "ContactEvent",
    "Configuration",
    "Trajectory",
    "TrajectorySet",
    "CollisionRecord",
    "CollisionLog",
    "EngineStats",
    "RunRecord",
    "SizeHistogram",
]

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import chex
import numpy as np
from jaxtyping import Float, Int


@dataclass(frozen=True)
class PhasePoint:
    """A position on the unit torus with a velocity."""

    x: Float[np.ndarray, " d"]
    v: Float[np.ndarray, " d"]

    def __post_init__(self) -> None:
        if self.x.shape != self.v.shape:
            raise ValueError(f"Position shape {self.x.shape} does not match velocity shape {self.v.shape}")
        if not (np.all(self.x >= 0.0) and np.all(self.x < 1.0)):
            raise ValueError(f"Position {self.x} is outside the unit torus")
        if not np.all(np.isfinite(self.v)):
            raise ValueError(f"Velocity {self.v} is not finite")

    @property
    def dim(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class ContactEvent:
    """A contact at time `t` with normal `omega = (x_i - x_j) / eps`."""

    t: float
    omega: Float[np.ndarray, " d"]
    pair: tuple[int, int]

    def swapped(self) -> "ContactEvent":
        return ContactEvent(t=self.t, omega=-self.omega, pair=(self.pair[1], self.pair[0]))


@dataclass(frozen=True)
class Configuration:
    """A realization's time-zero state."""

    positions: Float[np.ndarray, "n d"]
    velocities: Float[np.ndarray, "n d"]
    eps: float

    def __post_init__(self) -> None:
        chex.assert_rank(self.positions, 2)
        chex.assert_equal_shape([self.positions, self.velocities])

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def particles(self) -> tuple[PhasePoint, ...]:
        return tuple(PhasePoint(x=x, v=v) for x, v in zip(self.positions, self.velocities))

    @classmethod
    def from_particles(cls, particles: Sequence[PhasePoint], eps: float, dim: int | None = None) -> "Configuration":
        if not particles:
            if dim is None:
                raise ValueError("Cannot infer the dimension of an empty configuration")
            return cls(positions=np.zeros((0, dim)), velocities=np.zeros((0, dim)), eps=eps)
        return cls(
            positions=np.stack([p.x for p in particles]),
            velocities=np.stack([p.v for p in particles]),
            eps=eps,
        )

    def min_separation(self) -> float:
        """Smallest pairwise torus distance, or infinity for fewer than two particles."""
        if self.n < 2:
            return float("inf")
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        diff -= np.floor(diff + 0.5)
        dist = np.sqrt(np.sum(diff**2, axis=-1))
        iu = np.triu_indices(self.n, k=1)
        return float(dist[iu].min())

    def satisfies_hard_core(self, rtol: float = 1e-9) -> bool:
        return self.min_separation() >= self.eps * (1.0 - rtol)

    def kinetic_energy(self) -> float:
        return 0.5 * float(np.sum(self.velocities**2))

    def momentum(self) -> Float[np.ndarray, " d"]:
        return self.velocities.sum(axis=0)


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear path of one particle.

    Row `k` holds the breakpoint time, the position at that time (wrapped into
    the torus) and the outgoing velocity. The last row sits at the horizon.
    """

    particle_id: int
    times: Float[np.ndarray, " m"]
    positions: Float[np.ndarray, "m d"]
    velocities: Float[np.ndarray, "m d"]

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def segment_index(self, t: float) -> int:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(k, 0), len(self.times) - 1)

    def position_at(self, t: float) -> Float[np.ndarray, " d"]:
        k = self.segment_index(t)
        return np.mod(self.positions[k] + (t - self.times[k]) * self.velocities[k], 1.0)

    def velocity_at(self, t: float) -> Float[np.ndarray, " d"]:
        return self.velocities[self.segment_index(t)]

    def state_at(self, t: float) -> PhasePoint:
        x = self.position_at(t)
        x[x >= 1.0] = 0.0
        return PhasePoint(x=x, v=self.velocity_at(t).copy())

    def displacement(self, t0: float, t1: float) -> Float[np.ndarray, " d"]:
        """Unwrapped distance travelled on `[t0, t1]`."""
        edges = np.clip(np.append(self.times[1:], np.inf), t0, t1)
        starts = np.clip(self.times, t0, t1)
        return ((edges - starts)[:, None] * self.velocities).sum(axis=0)

    def max_speed(self) -> float:
        return float(np.sqrt(np.sum(self.velocities**2, axis=-1)).max())


@dataclass(frozen=True)
class TrajectorySet:
    trajectories: tuple[Trajectory, ...]
    horizon: float

    def __len__(self) -> int:
        return len(self.trajectories)

    def __getitem__(self, i: int) -> Trajectory:
        return self.trajectories[i]

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    def positions_at(self, t: float) -> Float[np.ndarray, "n d"]:
        return np.stack([tr.position_at(t) for tr in self.trajectories])

    def velocities_at(self, t: float) -> Float[np.ndarray, "n d"]:
        return np.stack([tr.velocity_at(t) for tr in self.trajectories])

    def subset(self, ids: Sequence[int]) -> "TrajectorySet":
        return TrajectorySet(trajectories=tuple(self.trajectories[i] for i in ids), horizon=self.horizon)


@dataclass(frozen=True)
class CollisionRecord:
    t: float
    i: int
    j: int
    omega: Float[np.ndarray, " d"]
    pre_i: Float[np.ndarray, " d"]
    pre_j: Float[np.ndarray, " d"]
    post_i: Float[np.ndarray, " d"]
    post_j: Float[np.ndarray, " d"]

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j) if self.i < self.j else (self.j, self.i)


@dataclass(frozen=True)
class CollisionLog:
    events: tuple[CollisionRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[CollisionRecord]:
        return iter(self.events)

    def pairs(self) -> list[tuple[int, int]]:
        return [e.pair for e in self.events]

    def times(self) -> Float[np.ndarray, " k"]:
        return np.array([e.t for e in self.events], dtype=np.float64)


@dataclass
class EngineStats:
    collisions: int = 0
    cell_crossings: int = 0
    stale_pops: int = 0
    peak_queue: int = 0
    compactions: int = 0


@dataclass(frozen=True)
class RunRecord:
    """Everything one molecular-dynamics run produces."""

    run_id: int
    config: Configuration
    trajectories: TrajectorySet
    log: CollisionLog
    stats: EngineStats = field(default_factory=EngineStats)

    @property
    def horizon(self) -> float:
        return self.trajectories.horizon

    def state_at(self, t: float) -> Configuration:
        positions = self.trajectories.positions_at(t)
        positions[positions >= 1.0] = 0.0
        return Configuration(positions=positions, velocities=self.trajectories.velocities_at(t), eps=self.config.eps)

    def final_configuration(self) -> Configuration:
        return self.state_at(self.trajectories.horizon)


@dataclass(frozen=True)
class SizeHistogram:
    """Mergeable counts of cluster paths by size.

    `counts[s]` is the number of cluster paths of size `s` summed over
    `n_samples` realizations; `normalizer` is the summed mass (mu per MD run,
    M per coagulation run) used to turn counts into the measure of each size.
    """

    counts: Int[np.ndarray, " s"]
    n_samples: int
    normalizer: float

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], normalizer: float, n_samples: int = 1) -> "SizeHistogram":
        max_size = max(sizes, default=0)
        counts = np.bincount(np.asarray(sizes, dtype=np.int64), minlength=max_size + 1) if sizes else np.zeros(1, int)
        return cls(counts=counts.astype(np.int64), n_samples=n_samples, normalizer=normalizer)

    def merge(self, other: "SizeHistogram") -> "SizeHistogram":
        size = max(len(self.counts), len(other.counts))
        counts = np.zeros(size, dtype=np.int64)
        counts[: len(self.counts)] += self.counts
        counts[: len(other.counts)] += other.counts
        return SizeHistogram(
            counts=counts,
            n_samples=self.n_samples + other.n_samples,
            normalizer=self.normalizer + other.normalizer,
        )

    @property
    def sizes(self) -> Int[np.ndarray, " s"]:
        return np.arange(len(self.counts))

    @property
    def total_clusters(self) -> int:
        return int(self.counts.sum())

    @property
    def total_particles(self) -> int:
        return int((self.counts * self.sizes).sum())

    def frequency(self) -> Float[np.ndarray, " s"]:
        """Fraction of cluster paths having each size."""
        total = self.total_clusters
        return self.counts / total if total else np.zeros(len(self.counts))

    def measure(self) -> Float[np.ndarray, " s"]:
        """Cluster paths of each size per unit mass."""
        return self.counts / self.normalizer if self.normalizer else np.zeros(len(self.counts))

    def particle_fraction(self) -> Float[np.ndarray, " s"]:
        """Fraction of particles sitting in cluster paths of each size."""
        total = self.total_particles
        return self.counts * self.sizes / total if total else np.zeros(len(self.counts))

    def mean_size(self) -> float:
        total = self.total_clusters
        return self.total_particles / total if total else 0.0
