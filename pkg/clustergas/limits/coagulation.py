"""Stochastic coagulation of limiting cluster paths.

Each cluster is a tree of point particles whose members move freely and
scatter only at the cluster's own collision times. Two clusters merge when
members `i` and `j` of different clusters share a mollification cell, at
rate `kappa_d |v_i - v_j| / (M delta^d)` per unordered pair.
"""

__all__ = [
    "LimitCluster",
    "CoagulationState",
    "CoagulationSnapshot",
    "CoagulationResult",
    "merge_clusters",
    "coagulation_step",
    "coagulation_run",
    "coagulation_size_law",
    "total_variation",
]

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from jaxtyping import Float

from clustergas.errors import MajorantBreach, TimeOrderViolation
from clustergas.geometry import kappa, sample_impact_vector, scatter, torus_displacement, wrap
from clustergas.sampler import InitialModel, sample_maxwellian
from clustergas.trees import OrderedTree
from clustergas.types import SizeHistogram

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LimitCluster:
    """Decorated tree realized as point-particle paths.

    Members are stored in increasing id order. `initial_positions` are
    unwrapped so that the colliding pair of each tree edge sits at the same
    point at the edge time. For edge `(a, b)` with `a < b`, `omegas[e]` points
    along `x_a - x_b` at contact.
    """

    member_ids: tuple[int, ...]
    tree: OrderedTree
    initial_positions: Float[np.ndarray, "n d"]
    velocities: Float[np.ndarray, "n d"]
    times: Float[np.ndarray, " e"]
    omegas: Float[np.ndarray, "e d"]

    @classmethod
    def singleton(cls, member_id: int, x: np.ndarray, v: np.ndarray) -> "LimitCluster":
        dim = x.shape[0]
        return cls(
            member_ids=(member_id,),
            tree=OrderedTree(n=1, edges=()),
            initial_positions=x[None, :].astype(np.float64),
            velocities=v[None, :].astype(np.float64),
            times=np.zeros(0),
            omegas=np.zeros((0, dim)),
        )

    @property
    def size(self) -> int:
        return len(self.member_ids)

    @property
    def y(self) -> Float[np.ndarray, " d"]:
        return wrap(self.initial_positions.mean(axis=0))

    def unwrapped_state_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        x = self.initial_positions.copy()
        v = self.velocities.copy()
        t_prev = 0.0
        for (a, b), tau, omega in zip(self.tree.edges, self.times, self.omegas):
            if tau > t:
                break
            x += v * (tau - t_prev)
            t_prev = float(tau)
            v[a], v[b] = scatter(v[a], v[b], omega)
        x += v * (t - t_prev)
        return x, v

    def state_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Member positions on the torus and velocities at time `t`."""
        x, v = self.unwrapped_state_at(t)
        return wrap(x), v

    def energy(self) -> float:
        return 0.5 * float(np.sum(self.velocities**2))

    def canonical(self) -> tuple:
        """Comparison key independent of how the cluster was assembled."""
        return (
            self.member_ids,
            self.tree.edges,
            tuple(np.round(wrap(self.initial_positions), 12).ravel()),
            tuple(np.round(self.velocities, 12).ravel()),
            tuple(np.round(self.times, 12)),
            tuple(np.round(self.omegas, 12).ravel()),
        )


def merge_clusters(a: LimitCluster, b: LimitCluster, i: int, j: int, t: float, omega: np.ndarray) -> LimitCluster:
    """Merges two clusters through a collision of member `i` of `a` with member `j` of `b`.

    Both clusters are translated by half the minimal-image gap between `i`
    and `j` at time `t`, in opposite directions, so the pair coincides. The
    new edge is appended with time `t` and normal `omega`, which points from
    `j` to `i`.

    Raises:
        TimeOrderViolation: If either cluster has a collision after `t`.
    """
    for c in (a, b):
        if len(c.times) and c.times[-1] > t:
            raise TimeOrderViolation(f"Cluster {c.member_ids} has a collision at {c.times[-1]} after merge time {t}")
    if set(a.member_ids) & set(b.member_ids):
        raise ValueError(f"Clusters {a.member_ids} and {b.member_ids} share members")
    ia, jb = a.member_ids.index(i), b.member_ids.index(j)
    xa, _ = a.unwrapped_state_at(t)
    xb, _ = b.unwrapped_state_at(t)
    gap = xa[ia] - xb[jb]
    delta = torus_displacement(np.zeros_like(gap), gap)
    lattice = gap - delta
    shifted_a = a.initial_positions - 0.5 * delta
    shifted_b = b.initial_positions + 0.5 * delta + lattice

    ids = a.member_ids + b.member_ids
    order = sorted(range(len(ids)), key=lambda k: ids[k])
    local = {old: new for new, old in enumerate(order)}
    size_a = a.size

    edges, times, omegas = [], [], []
    for (p, q), tau, om in zip(a.tree.edges, a.times, a.omegas):
        edges.append((local[p], local[q], tau, om))
    for (p, q), tau, om in zip(b.tree.edges, b.times, b.omegas):
        edges.append((local[p + size_a], local[q + size_a], tau, om))
    ni, nj = local[ia], local[size_a + jb]
    edges.append((ni, nj, t, np.asarray(omega, dtype=np.float64)))
    edges.sort(key=lambda e: e[2])

    oriented = []
    for p, q, tau, om in edges:
        if p > q:
            p, q, om = q, p, -om
        oriented.append((p, q))
        times.append(tau)
        omegas.append(om)

    positions = np.concatenate([shifted_a, shifted_b])[order]
    velocities = np.concatenate([a.velocities, b.velocities])[order]
    return LimitCluster(
        member_ids=tuple(ids[k] for k in order),
        tree=OrderedTree(n=len(ids), edges=tuple(oriented)),
        initial_positions=positions,
        velocities=velocities,
        times=np.array(times, dtype=np.float64),
        omegas=np.array(omegas, dtype=np.float64).reshape(len(times), a.velocities.shape[1]),
    )


@dataclass
class CoagulationState:
    """Cluster population with the per-particle phase points it realizes."""

    clusters: dict[int, LimitCluster]
    positions: Float[np.ndarray, "m d"]
    velocities: Float[np.ndarray, "m d"]
    label: np.ndarray
    cells_per_axis: int
    majorant: float
    t: float = 0.0
    merge_times: list[float] = field(default_factory=list)
    breaches: int = 0

    @classmethod
    def from_singletons(
        cls,
        positions: np.ndarray,
        velocities: np.ndarray,
        cells_per_axis: int,
        majorant: float,
    ) -> "CoagulationState":
        m = positions.shape[0]
        return cls(
            clusters={p: LimitCluster.singleton(p, positions[p], velocities[p]) for p in range(m)},
            positions=positions,
            velocities=velocities,
            label=np.arange(m),
            cells_per_axis=cells_per_axis,
            majorant=majorant,
        )

    @property
    def m(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def cell_size(self) -> float:
        return 1.0 / self.cells_per_axis

    @property
    def total_size(self) -> int:
        return sum(c.size for c in self.clusters.values())

    def energy(self) -> float:
        return float(sum(c.energy() for c in self.clusters.values()))

    def largest_fraction(self) -> float:
        return max((c.size for c in self.clusters.values()), default=0) / self.m

    def cell_groups(self) -> list[np.ndarray]:
        """Particle indices sharing a cell, for cells holding at least two particles."""
        cells = self.cells_per_axis
        idx = np.minimum(np.floor(self.positions * cells).astype(np.int64), cells - 1)
        cell_ids = np.ravel_multi_index(idx.T, (cells,) * self.dim)
        order = np.argsort(cell_ids, kind="stable")
        bounds = np.flatnonzero(np.diff(cell_ids[order])) + 1
        return [g for g in np.split(order, bounds) if len(g) >= 2]


def coagulation_size_law(state: CoagulationState) -> SizeHistogram:
    return SizeHistogram.from_sizes([c.size for c in state.clusters.values()], normalizer=float(state.m))


def total_variation(law_a: SizeHistogram, law_b: SizeHistogram) -> float:
    """Total variation between the particle-weighted size distributions."""
    pa, pb = law_a.particle_fraction(), law_b.particle_fraction()
    size = max(len(pa), len(pb))
    pa = np.pad(pa, (0, size - len(pa)))
    pb = np.pad(pb, (0, size - len(pb)))
    return 0.5 * float(np.abs(pa - pb).sum())


@dataclass(frozen=True)
class CoagulationSnapshot:
    t: float
    law: SizeHistogram
    largest_fraction: float
    mean_size: float
    merge_events: int
    energy: float

    @classmethod
    def of(cls, state: CoagulationState) -> "CoagulationSnapshot":
        law = coagulation_size_law(state)
        return cls(
            t=state.t,
            law=law,
            largest_fraction=state.largest_fraction(),
            mean_size=law.mean_size(),
            merge_events=len(state.merge_times),
            energy=state.energy(),
        )


@dataclass(frozen=True)
class CoagulationResult:
    snapshots: tuple[CoagulationSnapshot, ...]
    clusters: tuple[LimitCluster, ...]
    merge_times: tuple[float, ...]
    breaches: int

    @property
    def merge_events(self) -> int:
        return len(self.merge_times)

    def merge_rate(self, window: float) -> tuple[float, float]:
        """Merges per unit time on `[0, window]` with its Poisson error."""
        count = sum(1 for t in self.merge_times if t <= window)
        return count / window, math.sqrt(count) / window

    def size_rows(self) -> list[dict[str, float]]:
        rows = []
        for snap in self.snapshots:
            freq = snap.law.frequency()
            for size in range(1, len(freq)):
                if snap.law.counts[size]:
                    rows.append({"t": snap.t, "size": size, "frequency": float(freq[size])})
        return rows

    def summary_rows(self) -> list[dict[str, float]]:
        return [{"t": s.t, "largest_fraction": s.largest_fraction, "mean_size": s.mean_size} for s in self.snapshots]


def _merge_step(
    state: CoagulationState,
    t1: float,
    merge_kernel: float,
    rng: np.random.Generator,
) -> set[int]:
    """Processes one step's candidate merges in time order; returns the labels of changed clusters."""
    t0 = state.t
    rate = merge_kernel * kappa(state.dim) * state.majorant * (t1 - t0) / (state.m * state.cell_size**state.dim)
    candidates: list[tuple[float, int, int]] = []
    for members in state.cell_groups():
        nc = len(members)
        for _ in range(int(rng.poisson(0.5 * nc * (nc - 1) * rate))):
            a, b = rng.choice(nc, size=2, replace=False)
            candidates.append((t0 + (t1 - t0) * float(rng.random()), int(members[a]), int(members[b])))
    candidates.sort()

    touched: set[int] = set()
    for tau, i, j in candidates:
        ci, cj = int(state.label[i]), int(state.label[j])
        if ci == cj:
            continue
        w = state.velocities[i] - state.velocities[j]
        speed = float(np.linalg.norm(w))
        if speed > state.majorant:
            raise MajorantBreach(speed, state.majorant)
        if rng.random() * state.majorant >= speed:
            continue
        omega = sample_impact_vector(w, rng)
        merged = merge_clusters(state.clusters[ci], state.clusters[cj], i, j, tau, omega)
        keep, drop = min(ci, cj), max(ci, cj)
        del state.clusters[drop]
        state.clusters[keep] = merged
        members = np.array(merged.member_ids)
        state.label[members] = keep
        _, v = merged.state_at(tau)
        state.velocities[members] = v
        touched.discard(drop)
        touched.add(keep)
        state.merge_times.append(tau)
    return touched


def coagulation_step(state: CoagulationState, dt: float, rng: np.random.Generator, merge_kernel: float = 1.0) -> None:
    """Advances the population by `dt`, redoing the step with a doubled majorant on breach."""
    t1 = state.t + dt
    touched: set[int] = set()
    if merge_kernel > 0:
        while True:
            saved = (dict(state.clusters), state.label.copy(), state.velocities.copy(), len(state.merge_times))
            try:
                touched = _merge_step(state, t1, merge_kernel, rng)
                break
            except MajorantBreach as breach:
                state.clusters, state.label, state.velocities = saved[0], saved[1], saved[2]
                del state.merge_times[saved[3] :]
                state.majorant *= 2.0
                state.breaches += 1
                logger.warning("Relative speed %.3f exceeded majorant; doubling to %.3f", breach.speed, state.majorant)

    free = np.ones(state.m, dtype=bool)
    for key in touched:
        cluster = state.clusters[key]
        ids = np.array(cluster.member_ids)
        state.positions[ids], state.velocities[ids] = cluster.state_at(t1)
        free[ids] = False
    state.positions[free] = wrap(state.positions[free] + dt * state.velocities[free])
    state.t = t1


def coagulation_run(
    model: InitialModel,
    m: int,
    cell_size: float,
    horizon: float,
    rng: np.random.Generator,
    dt: float = 0.01,
    merge_kernel: float = 1.0,
    output_every: int = 1,
    majorant_factor: float = 3.0,
) -> CoagulationResult:
    """Marcus–Lushnikov dynamics of cluster paths from `m` i.i.d. singletons.

    Candidate pairs are drawn per cell and per step against a majorant speed,
    each with a uniform time inside the step. Candidates are processed in
    time order; pairs already in the same cluster are null events.

    Args:
        model: Initial density.
        m: Number of particles.
        cell_size: Mollification cell side; rounded so cells tile the torus.
        horizon: Final time.
        rng: Random stream.
        dt: Step used for cell assignment and candidate generation.
        merge_kernel: Multiplier of the merge rate; 0 disables merging.
        output_every: Steps between snapshots.
        majorant_factor: Initial majorant as a multiple of the rms relative speed.

    Returns:
        Snapshots, the final clusters and every merge time.
    """
    if dt <= 0 or horizon <= 0:
        raise ValueError(f"`{dt=}` and `{horizon=}` must be positive")
    dim = model.dim
    positions = model.profile.sample(m, dim, rng)
    velocities = sample_maxwellian(model.beta, rng, dim=dim, size=m)
    state = CoagulationState.from_singletons(
        positions,
        velocities,
        cells_per_axis=max(1, int(round(1.0 / cell_size))),
        majorant=majorant_factor * math.sqrt(2.0 * dim / model.beta),
    )

    snapshots = [CoagulationSnapshot.of(state)]
    n_steps = int(math.ceil(horizon / dt - 1e-9))
    for step in range(1, n_steps + 1):
        coagulation_step(state, min(step * dt, horizon) - state.t, rng, merge_kernel)
        if step % output_every == 0 or step == n_steps:
            snapshots.append(CoagulationSnapshot.of(state))

    logger.debug(
        "Coagulation: %d merges, %d clusters left, %d breaches",
        len(state.merge_times),
        len(state.clusters),
        state.breaches,
    )
    return CoagulationResult(
        snapshots=tuple(snapshots),
        clusters=tuple(state.clusters[k] for k in sorted(state.clusters)),
        merge_times=tuple(state.merge_times),
        breaches=state.breaches,
    )
