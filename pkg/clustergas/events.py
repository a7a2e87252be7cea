"""Defines the event queue used by the event-driven engine.

Events are never removed from the heap. Each particle carries a version
counter that is bumped whenever its motion changes or its neighborhood is
re-predicted; an event remembers the versions it was scheduled under and is
discarded on pop when either no longer matches.
"""

__all__ = [
    "EventKind",
    "ScheduledEvent",
    "EventQueue",
]

import heapq
import logging
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from clustergas.types import EngineStats

logger = logging.getLogger(__name__)


class EventKind(IntEnum):
    COLLISION = 0
    CELL_CROSSING = 1


class ScheduledEvent(NamedTuple):
    """Heap entry. Ordered by time, then by the particle pair, then by kind.

    Cell crossings of particle `i` use `j == i`.
    """

    t: float
    i: int
    j: int
    kind: EventKind
    version_i: int
    version_j: int


class EventQueue:
    """Min-heap of scheduled events with lazy invalidation."""

    def __init__(self, n: int, stats: EngineStats | None = None, compaction_factor: int = 8) -> None:
        self.versions = np.zeros(n, dtype=np.int64)
        self.stats = EngineStats() if stats is None else stats
        self._heap: list[ScheduledEvent] = []
        self._limit = compaction_factor * n + 64

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, t: float, i: int, j: int, kind: EventKind) -> None:
        if kind == EventKind.COLLISION and i > j:
            i, j = j, i
        event = ScheduledEvent(t, i, j, kind, int(self.versions[i]), int(self.versions[j]))
        heapq.heappush(self._heap, event)
        if len(self._heap) > self._limit:
            self.compact()
        self.stats.peak_queue = max(self.stats.peak_queue, len(self._heap))

    def invalidate(self, i: int) -> None:
        self.versions[i] += 1

    def is_stale(self, event: ScheduledEvent) -> bool:
        return event.version_i != self.versions[event.i] or event.version_j != self.versions[event.j]

    def pop(self) -> ScheduledEvent | None:
        """Returns the earliest event that is still valid, or None when empty."""
        while self._heap:
            event = heapq.heappop(self._heap)
            if not self.is_stale(event):
                return event
            self.stats.stale_pops += 1
        return None

    def compact(self) -> None:
        before = len(self._heap)
        self._heap = [e for e in self._heap if not self.is_stale(e)]
        heapq.heapify(self._heap)
        self.stats.compactions += 1
        self._limit = max(self._limit, 2 * len(self._heap))
        logger.debug("Compacted event queue from %d to %d entries", before, len(self._heap))
