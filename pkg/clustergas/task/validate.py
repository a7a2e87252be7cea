"""Deterministic oracle suites behind the `validate` command."""

__all__ = [
    "SuiteResult",
    "geometry_suite",
    "combinatorics_suite",
    "engine_suite",
    "partition_suite",
    "run_suites",
]

import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np

from clustergas.config import RunConfig
from clustergas.engine import EventDrivenEngine, NaiveEngine
from clustergas.geometry import kappa, sample_unit_vector, scatter, sphere_area
from clustergas.invariants import check_run
from clustergas.sampler import GrandCanonicalSampler, InitialModel, sample_maxwellian
from clustergas.task.ensemble import run_ensemble, simulate_run
from clustergas.trees import (
    SimpleGraph,
    enumerate_graphs,
    enumerate_labeled_trees,
    ordered_tree_count,
    phi,
    random_graph,
    spanning_tree_count,
    tree_inequality_holds,
)
from clustergas.utils.oracles import (
    cayley_count,
    kappa_quadrature,
    mean_relative_speed,
    mean_relative_speed_quadrature,
    phi_complete,
)
from clustergas.utils.rng import StreamFactory

logger = logging.getLogger(__name__)


@dataclass
class SuiteResult:
    suite: str
    check: str
    cases: int = 0
    failures: int = 0
    first_failure: str = ""

    def record(self, ok: bool, detail: str = "") -> None:
        self.cases += 1
        if not ok:
            if not self.failures:
                self.first_failure = detail
            self.failures += 1

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def row(self) -> dict[str, object]:
        return {
            "suite": self.suite,
            "check": self.check,
            "cases": self.cases,
            "failures": self.failures,
            "passed": self.passed,
            "first_failure": self.first_failure,
        }


def geometry_suite(rng: np.random.Generator, n_cases: int = 1000) -> list[SuiteResult]:
    consts = SuiteResult("geometry", "kappa_and_speed_quadrature")
    for dim in (2, 3):
        consts.record(abs(kappa(dim) - kappa_quadrature(dim)) < 1e-8, f"kappa({dim})")
        consts.record(abs(sphere_area(dim) - (2 * math.pi if dim == 2 else 4 * math.pi)) < 1e-12, f"area({dim})")
        for beta in (0.5, 1.0, 2.0):
            diff = abs(mean_relative_speed(beta, dim) - mean_relative_speed_quadrature(beta, dim))
            consts.record(diff < 1e-8, f"relative speed d={dim} beta={beta}")

    scattering = SuiteResult("geometry", "scatter_conservation")
    for _ in range(n_cases):
        dim = int(rng.integers(2, 4))
        v_i, v_j = rng.standard_normal(dim), rng.standard_normal(dim)
        omega = sample_unit_vector(dim, rng)
        p_i, p_j = scatter(v_i, v_j, omega)
        momentum = np.linalg.norm((p_i + p_j) - (v_i + v_j))
        energy = abs(p_i @ p_i + p_j @ p_j - v_i @ v_i - v_j @ v_j)
        back_i, back_j = scatter(p_i, p_j, omega)
        involution = np.linalg.norm(back_i - v_i) + np.linalg.norm(back_j - v_j)
        scattering.record(max(momentum, energy, involution) < 1e-12, f"omega={omega}")
    return [consts, scattering]


def combinatorics_suite(rng: np.random.Generator, full: bool = False) -> list[SuiteResult]:
    max_k = 6 if full else 5
    trees = SuiteResult("combinatorics", "phi_of_trees")
    bound = SuiteResult("combinatorics", "tree_graph_inequality")
    cross = SuiteResult("combinatorics", "phi_recursive_vs_enumerate")
    for k in range(1, max_k + 1):
        for g in enumerate_graphs(k):
            if not g.is_connected():
                continue
            value = phi(g)
            if g.is_tree():
                trees.record(value == (-1) ** (k - 1), f"k={k} edges={sorted(g.edges)}")
            bound.record(abs(value) <= spanning_tree_count(g), f"k={k} edges={sorted(g.edges)}")
            cross.record(value == phi(g, mode="enumerate"), f"k={k} edges={sorted(g.edges)}")

    random = SuiteResult("combinatorics", "random_graph_inequality")
    for _ in range(1000):
        g = random_graph(int(rng.integers(2, 13)), float(rng.uniform(0.2, 0.8)), rng)
        if g.is_connected():
            random.record(tree_inequality_holds(g), f"k={g.k} edges={sorted(g.edges)}")

    complete = SuiteResult("combinatorics", "phi_complete_graph")
    for k in range(1, 6):
        complete.record(phi(SimpleGraph.complete(k), mode="enumerate") == phi_complete(k), f"K_{k}")

    counts = SuiteResult("combinatorics", "cayley_counts")
    for k in range(1, max_k + 1):
        labeled = sum(1 for _ in enumerate_labeled_trees(k))
        counts.record(labeled == cayley_count(k), f"labeled trees on {k}")
        counts.record(ordered_tree_count(k) == cayley_count(k) * math.factorial(max(k - 1, 0)), f"ordered trees {k}")
        counts.record(spanning_tree_count(SimpleGraph.complete(k)) == cayley_count(k), f"Kirchhoff K_{k}")
    return [trees, bound, cross, random, complete, counts]


def engine_suite(rng: np.random.Generator, n_cases: int = 200, eps: float = 0.1, horizon: float = 2.0) -> SuiteResult:
    """Event-driven engine against the all-pairs oracle on small random systems."""
    result = SuiteResult("engine", "event_vs_naive")
    model = InitialModel(dim=2, beta=1.0)
    for case in range(n_cases):
        n = int(rng.integers(2, 7))
        sampler = GrandCanonicalSampler(mu=float(n), eps=eps, model=model, mode="sequential")
        config, _ = sampler(rng)
        if config.n < 2:
            config = dataclasses.replace(
                config,
                positions=np.array([[0.1, 0.1], [0.6, 0.6]]),
                velocities=sample_maxwellian(1.0, rng, dim=2, size=2),
            )
        fast = EventDrivenEngine().run(config, horizon, run_id=case)
        slow = NaiveEngine().run(config, horizon, run_id=case)
        same_pairs = fast.log.pairs() == slow.log.pairs()
        same_times = same_pairs and bool(np.all(np.abs(fast.log.times() - slow.log.times()) <= 1e-9))
        result.record(same_pairs and same_times, f"case {case}: {fast.log.pairs()} vs {slow.log.pairs()}")
    return result


def partition_suite(cfg: RunConfig, n_runs: int = 20) -> SuiteResult:
    result = SuiteResult("partition", "invariants")
    small = dataclasses.replace(cfg, n_runs=n_runs, engine=dataclasses.replace(cfg.engine, check_invariants=False))
    for record in run_ensemble(simulate_run, small, desc="partition runs"):
        for name, violations in check_run(record).items():
            result.record(not violations, f"run {record.run_id} {name}: {violations[:1]}")
    return result


def run_suites(cfg: RunConfig, full: bool = False) -> list[SuiteResult]:
    streams = StreamFactory(cfg.seed).split(0, 3)
    results = geometry_suite(streams[0])
    results += combinatorics_suite(streams[1], full=full)
    results.append(engine_suite(streams[2]))
    results.append(partition_suite(cfg, n_runs=20 if full else 5))
    for r in results:
        logger.info("%s/%s: %d cases, %d failures", r.suite, r.check, r.cases, r.failures)
    return results
