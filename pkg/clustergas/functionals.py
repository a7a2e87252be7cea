"""Test functionals evaluated on trajectories and cluster paths.

Single-particle functionals define `H(Z) = sum_i h(z_i([0, T]))`. Cluster
functionals act on a whole cluster path. Either kind is summed over the
cluster paths of a run to give the run-level total.
"""

__all__ = [
    "FunctionalKind",
    "TestFunctional",
    "SingleParticleFunctional",
    "ClusterFunctional",
    "ConstantFunctional",
    "PositionModeFunctional",
    "SpeedFunctional",
    "ClusterSizeIndicator",
    "ClusterSizeFunctional",
    "functional_totals",
    "get_functional",
]

import functools
import logging
import math
from abc import ABC, abstractmethod
from typing import ClassVar, Literal, Sequence

import attrs
import numpy as np
import xax

from clustergas.clusters import ClusterPath, InteractionGraph, partition_cluster_paths
from clustergas.types import RunRecord, Trajectory

logger = logging.getLogger(__name__)

FunctionalKind = Literal["single", "cluster"]


@attrs.define(frozen=True, kw_only=True)
class TestFunctional(ABC):
    """Functional with growth envelope `|H(Z)| <= c1 |Z| + c2 E_Z`.

    Continuity under uniform convergence of paths is not checked.
    """

    __test__ = False
    kind: ClassVar[FunctionalKind]

    @property
    @abstractmethod
    def c1(self) -> float:
        """Coefficient of the particle count in the growth envelope."""

    @property
    def c2(self) -> float:
        return 0.0

    @abstractmethod
    def on_path(self, path: ClusterPath) -> float:
        """Evaluates the functional on one cluster path."""

    def on_paths(self, paths: Sequence[ClusterPath]) -> float:
        return float(sum(self.on_path(p) for p in paths))

    def check_growth(self, beta: float) -> None:
        if self.c2 > beta / 4:
            raise ValueError(f"Growth constant c2={self.c2} of {self.functional_name} exceeds beta/4={beta / 4}")

    def get_name(self) -> str:
        return xax.camelcase_to_snakecase(self.__class__.__name__)

    @functools.cached_property
    def functional_name(self) -> str:
        return self.get_name()


@attrs.define(frozen=True, kw_only=True)
class SingleParticleFunctional(TestFunctional):
    kind: ClassVar[FunctionalKind] = "single"

    @abstractmethod
    def h(self, trajectory: Trajectory) -> float:
        """Evaluates the single-particle function on one path."""

    def on_path(self, path: ClusterPath) -> float:
        return float(sum(self.h(tr) for tr in path.trajectories))


@attrs.define(frozen=True, kw_only=True)
class ClusterFunctional(TestFunctional):
    kind: ClassVar[FunctionalKind] = "cluster"


@attrs.define(frozen=True, kw_only=True)
class ConstantFunctional(SingleParticleFunctional):
    value: float = attrs.field(default=1.0)

    @property
    def c1(self) -> float:
        return abs(self.value)

    def h(self, trajectory: Trajectory) -> float:
        return self.value


@attrs.define(frozen=True, kw_only=True)
class PositionModeFunctional(SingleParticleFunctional):
    """`cos` or `sin` of `2 pi k x_1` at a fixed time (the path's end by default)."""

    k: int = attrs.field(default=1)
    part: Literal["cos", "sin"] = attrs.field(default="cos", validator=attrs.validators.in_(("cos", "sin")))
    time: float | None = attrs.field(default=None)
    scale: float = attrs.field(default=1.0)

    @property
    def c1(self) -> float:
        return abs(self.scale)

    def h(self, trajectory: Trajectory) -> float:
        t = trajectory.end if self.time is None else self.time
        phase = 2 * math.pi * self.k * float(trajectory.position_at(t)[0])
        return self.scale * (math.cos(phase) if self.part == "cos" else math.sin(phase))


@attrs.define(frozen=True, kw_only=True)
class SpeedFunctional(SingleParticleFunctional):
    """`scale * |v|^2 / 2` at a fixed time (the path's end by default)."""

    scale: float = attrs.field(default=0.1)
    time: float | None = attrs.field(default=None)

    @property
    def c1(self) -> float:
        return 0.0

    @property
    def c2(self) -> float:
        return abs(self.scale)

    def h(self, trajectory: Trajectory) -> float:
        t = trajectory.end if self.time is None else self.time
        return 0.5 * self.scale * float(np.sum(trajectory.velocity_at(t) ** 2))


@attrs.define(frozen=True, kw_only=True)
class ClusterSizeIndicator(ClusterFunctional):
    size: int = attrs.field(validator=attrs.validators.ge(1))

    @property
    def c1(self) -> float:
        return 1.0

    def on_path(self, path: ClusterPath) -> float:
        return 1.0 if path.size == self.size else 0.0


@attrs.define(frozen=True, kw_only=True)
class ClusterSizeFunctional(ClusterFunctional):
    @property
    def c1(self) -> float:
        return 1.0

    def on_path(self, path: ClusterPath) -> float:
        return float(path.size)


def functional_totals(records: Sequence[RunRecord], functional: TestFunctional) -> np.ndarray:
    """Run-level totals `sum over cluster paths of H(path)`, one per record."""
    totals = np.zeros(len(records))
    for r, record in enumerate(records):
        if functional.kind == "single":
            assert isinstance(functional, SingleParticleFunctional)
            totals[r] = sum(functional.h(tr) for tr in record.trajectories)
        else:
            graph = InteractionGraph.from_log(record.log, record.config.n)
            totals[r] = functional.on_paths(partition_cluster_paths(graph, record.trajectories))
    return totals


def get_functional(name: str, **kwargs: float) -> TestFunctional:
    match name:
        case "constant":
            return ConstantFunctional(**kwargs)
        case "position_mode":
            return PositionModeFunctional(**kwargs)  # type: ignore[arg-type]
        case "speed":
            return SpeedFunctional(**kwargs)
        case "cluster_size_indicator":
            return ClusterSizeIndicator(**kwargs)  # type: ignore[arg-type]
        case "cluster_size":
            return ClusterSizeFunctional()
        case _:
            raise ValueError(f"Unsupported functional: {name}")
