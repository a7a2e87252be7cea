"""Exact hard-sphere dynamics on the unit torus.

Both engines share the particle bookkeeping and the collision rule; they only
differ in how the next event is found. The event-driven engine keeps a cell
list and a lazily invalidated priority queue, while the naive engine rescans
every pair after every collision and serves as the reference.
"""

__all__ = [
    "EngineType",
    "Engine",
    "EventDrivenEngine",
    "NaiveEngine",
    "get_engine",
    "run",
    "naive_run",
    "time_reversed",
]

import functools
import itertools
import logging
import math
from abc import ABC, abstractmethod
from typing import Literal

import attrs
import numpy as np
import xax

from clustergas.errors import CorruptState, EventStorm
from clustergas.events import EventKind, EventQueue
from clustergas.geometry import pair_collision_time, scatter, torus_displacement, wrap
from clustergas.types import (
    CollisionLog,
    CollisionRecord,
    Configuration,
    EngineStats,
    PhasePoint,
    RunRecord,
    Trajectory,
    TrajectorySet,
)

logger = logging.getLogger(__name__)

EngineType = Literal["event", "naive"]

MIN_CELLS_PER_AXIS = 4


class _ParticleState:
    """Lazily advanced positions plus the breakpoint record of every particle."""

    def __init__(self, config: Configuration) -> None:
        self.eps = config.eps
        self.n = config.n
        self.x = np.array(config.positions, dtype=np.float64)
        self.v = np.array(config.velocities, dtype=np.float64)
        self.tlast = np.zeros(self.n)
        self.times: list[list[float]] = [[0.0] for _ in range(self.n)]
        self.pos: list[list[np.ndarray]] = [[self.x[i].copy()] for i in range(self.n)]
        self.vel: list[list[np.ndarray]] = [[self.v[i].copy()] for i in range(self.n)]
        self.log: list[CollisionRecord] = []

    def position(self, i: int, t: float) -> np.ndarray:
        return wrap(self.x[i] + (t - self.tlast[i]) * self.v[i])

    def phase(self, i: int, t: float) -> PhasePoint:
        return PhasePoint(x=self.position(i, t), v=self.v[i].copy())

    def advance(self, i: int, t: float) -> None:
        self.x[i] = self.position(i, t)
        self.tlast[i] = t

    def _record(self, i: int, t: float) -> None:
        if self.times[i][-1] == t:
            self.pos[i][-1] = self.x[i].copy()
            self.vel[i][-1] = self.v[i].copy()
        else:
            self.times[i].append(t)
            self.pos[i].append(self.x[i].copy())
            self.vel[i].append(self.v[i].copy())

    def collide(self, i: int, j: int, t: float) -> CollisionRecord:
        self.advance(i, t)
        self.advance(j, t)
        r = torus_displacement(self.x[j], self.x[i])
        omega = r / np.linalg.norm(r)
        pre_i, pre_j = self.v[i].copy(), self.v[j].copy()
        post_i, post_j = scatter(pre_i, pre_j, omega)

        # Reset the pair to exact contact, symmetric about its midpoint.
        mid = self.x[j] + 0.5 * r
        self.x[i] = wrap(mid + 0.5 * self.eps * omega)
        self.x[j] = wrap(mid - 0.5 * self.eps * omega)
        self.v[i], self.v[j] = post_i, post_j
        self._record(i, t)
        self._record(j, t)

        record = CollisionRecord(
            t=t,
            i=i,
            j=j,
            omega=omega,
            pre_i=pre_i,
            pre_j=pre_j,
            post_i=post_i.copy(),
            post_j=post_j.copy(),
        )
        self.log.append(record)
        return record

    def finish(self, horizon: float) -> tuple[TrajectorySet, CollisionLog]:
        trajectories = []
        for i in range(self.n):
            if self.times[i][-1] < horizon:
                self.times[i].append(horizon)
                self.pos[i].append(self.position(i, horizon))
                self.vel[i].append(self.v[i].copy())
            trajectories.append(
                Trajectory(
                    particle_id=i,
                    times=np.array(self.times[i]),
                    positions=np.stack(self.pos[i]),
                    velocities=np.stack(self.vel[i]),
                )
            )
        return TrajectorySet(trajectories=tuple(trajectories), horizon=horizon), CollisionLog(events=tuple(self.log))


@attrs.define(frozen=True, kw_only=True)
class Engine(ABC):
    """Integrates free flight and specular collisions on `[0, horizon]`."""

    max_collisions_per_particle: int = attrs.field(default=1000)

    @abstractmethod
    def _evolve(self, state: _ParticleState, horizon: float, stats: EngineStats) -> None:
        """Processes every collision up to the horizon."""

    def _on_collision(self, state: _ParticleState, stats: EngineStats) -> None:
        stats.collisions += 1
        if stats.collisions > self.max_collisions_per_particle * max(state.n, 1):
            raise EventStorm(
                f"{stats.collisions} collisions among {state.n} particles exceeds "
                f"{self.max_collisions_per_particle} per particle; the configuration is near-degenerate"
            )

    def run(self, config: Configuration, horizon: float, run_id: int = 0) -> RunRecord:
        """Simulates one realization.

        Args:
            config: The time-zero configuration.
            horizon: The final time T.
            run_id: Identifier stored on the returned record.

        Returns:
            Trajectories, collision log and engine counters.
        """
        if horizon <= 0:
            raise ValueError(f"`{horizon=}` must be positive")
        if not config.satisfies_hard_core():
            raise CorruptState(
                f"Initial configuration has separation {config.min_separation():.17g} below diameter {config.eps}"
            )
        state = _ParticleState(config)
        stats = EngineStats()
        self._evolve(state, horizon, stats)
        trajectories, log = state.finish(horizon)
        logger.debug(
            "Run %d (%s): %d collisions, %d cell crossings, %d stale pops, peak queue %d",
            run_id,
            self.engine_name,
            stats.collisions,
            stats.cell_crossings,
            stats.stale_pops,
            stats.peak_queue,
        )
        return RunRecord(run_id=run_id, config=config, trajectories=trajectories, log=log, stats=stats)

    def get_name(self) -> str:
        return xax.camelcase_to_snakecase(self.__class__.__name__)

    @functools.cached_property
    def engine_name(self) -> str:
        return self.get_name()


@attrs.define(frozen=True, kw_only=True)
class EventDrivenEngine(Engine):
    """Cell lists plus a priority queue of collisions and cell crossings.

    The box is split into `floor(1 / eps)` cells per axis, so cells are at
    least one diameter wide and only the `3^d` surrounding cells can hold a
    collision partner. Pair predictions are only trusted until either
    particle leaves its cell; the crossing itself triggers re-prediction.
    Boxes with fewer than four cells per axis fall back to all pairs.
    """

    def _evolve(self, state: _ParticleState, horizon: float, stats: EngineStats) -> None:
        n, eps = state.n, state.eps
        if n < 2:
            return
        dim = state.x.shape[1]
        queue = EventQueue(n, stats)
        ncell = int(math.floor(1.0 / eps))
        use_cells = ncell >= MIN_CELLS_PER_AXIS
        h = 1.0 / ncell if use_cells else 1.0

        cells = np.minimum(np.floor(state.x / h).astype(np.int64), ncell - 1) if use_cells else None
        occupancy: dict[tuple[int, ...], set[int]] = {}
        if cells is not None:
            for i in range(n):
                occupancy.setdefault(tuple(cells[i]), set()).add(i)
        offsets = list(itertools.product((-1, 0, 1), repeat=dim))
        next_cross = np.full(n, math.inf)
        cross_axis = np.zeros(n, dtype=np.int64)
        cross_step = np.zeros(n, dtype=np.int64)

        def neighbors(i: int) -> list[int]:
            if cells is None:
                return [j for j in range(n) if j != i]
            found: set[int] = set()
            for off in offsets:
                key = tuple(int(c) for c in (cells[i] + np.array(off)) % ncell)
                found |= occupancy.get(key, set())
            found.discard(i)
            return sorted(found)

        def predict_crossing(i: int, t: float) -> None:
            assert cells is not None
            local = state.position(i, t) - cells[i] * h
            local -= np.floor(local + 0.5)
            best, axis, step = math.inf, 0, 0
            for k in range(dim):
                vk = float(state.v[i, k])
                if vk > 0:
                    s = (h - local[k]) / vk
                elif vk < 0:
                    s = local[k] / -vk
                else:
                    continue
                s = max(0.0, float(s))
                if s < best:
                    best, axis, step = s, k, 1 if vk > 0 else -1
            next_cross[i] = t + best
            cross_axis[i], cross_step[i] = axis, step
            if t + best <= horizon:
                queue.schedule(t + best, i, i, EventKind.CELL_CROSSING)

        def predict_pair(i: int, j: int, t: float) -> None:
            window = min(horizon, next_cross[i], next_cross[j]) - t
            if window < 0:
                return
            event = pair_collision_time(state.phase(i, t), state.phase(j, t), eps, window, pair=(i, j))
            if event is not None:
                queue.schedule(t + event.t, i, j, EventKind.COLLISION)

        if use_cells:
            for i in range(n):
                predict_crossing(i, 0.0)
        for i in range(n):
            for j in neighbors(i):
                if j > i:
                    predict_pair(i, j, 0.0)

        while (event := queue.pop()) is not None:
            t = event.t
            match event.kind:
                case EventKind.COLLISION:
                    i, j = event.i, event.j
                    state.collide(i, j, t)
                    self._on_collision(state, stats)
                    queue.invalidate(i)
                    queue.invalidate(j)
                    if use_cells:
                        predict_crossing(i, t)
                        predict_crossing(j, t)
                    for k in neighbors(i):
                        predict_pair(i, k, t)
                    for k in neighbors(j):
                        if k != i:
                            predict_pair(j, k, t)

                case EventKind.CELL_CROSSING:
                    assert cells is not None
                    i = event.i
                    state.advance(i, t)
                    stats.cell_crossings += 1
                    occupancy[tuple(cells[i])].discard(i)
                    cells[i, cross_axis[i]] = (cells[i, cross_axis[i]] + cross_step[i]) % ncell
                    occupancy.setdefault(tuple(cells[i]), set()).add(i)
                    queue.invalidate(i)
                    predict_crossing(i, t)
                    for k in neighbors(i):
                        predict_pair(i, k, t)

                case _:
                    raise ValueError(f"Unknown event kind: {event.kind}")


@attrs.define(frozen=True, kw_only=True)
class NaiveEngine(Engine):
    """Recomputes the earliest collision among all pairs after every event."""

    def _evolve(self, state: _ParticleState, horizon: float, stats: EngineStats) -> None:
        t = 0.0
        while True:
            best: tuple[float, int, int] | None = None
            for i, j in itertools.combinations(range(state.n), 2):
                event = pair_collision_time(state.phase(i, t), state.phase(j, t), state.eps, horizon - t, pair=(i, j))
                if event is None:
                    continue
                key = (t + event.t, i, j)
                if best is None or key < best:
                    best = key
            if best is None:
                return
            t, i, j = best
            state.collide(i, j, t)
            self._on_collision(state, stats)


def get_engine(engine_type: EngineType, **kwargs: int) -> Engine:
    match engine_type:
        case "event":
            return EventDrivenEngine(**kwargs)
        case "naive":
            return NaiveEngine(**kwargs)
        case _:
            raise ValueError(f"Unsupported engine type: {engine_type}")


def run(config: Configuration, horizon: float) -> tuple[TrajectorySet, CollisionLog]:
    record = EventDrivenEngine().run(config, horizon)
    return record.trajectories, record.log


def naive_run(config: Configuration, horizon: float) -> tuple[TrajectorySet, CollisionLog]:
    record = NaiveEngine().run(config, horizon)
    return record.trajectories, record.log


def time_reversed(config: Configuration) -> Configuration:
    """Same positions with every velocity negated."""
    return Configuration(positions=config.positions.copy(), velocities=-config.velocities, eps=config.eps)
