"""Runs independent realizations across a worker pool.

Run `r` always draws from stream `(seed, r)`, results come back in run
order, and reductions use a fixed pairwise tree, so every output depends
only on the configuration and not on the number of workers.
"""

__all__ = [
    "RunSummary",
    "AggregateSummary",
    "run_ensemble",
    "simulate_run",
    "summarize_run",
    "summarize_record",
    "summarize_aggregates",
    "summarize_ensemble",
    "merge_size_laws",
]

import datetime
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Sequence, TypeVar

import numpy as np
import tqdm
import xax

from clustergas.clusters import (
    InteractionGraph,
    aggregate_components,
    aggregate_connectivity,
    cluster_size_law,
    cluster_summary_rows,
    detect_overlaps,
    largest_cluster_fraction,
    mean_cluster_size,
    partition_cluster_paths,
)
from clustergas.config import RunConfig, initial_model, resolved_mu
from clustergas.engine import get_engine
from clustergas.functionals import get_functional
from clustergas.invariants import assert_invariants
from clustergas.limits.dsmc import fourier_modes
from clustergas.sampler import GrandCanonicalSampler
from clustergas.stats import Estimator, merge_pairwise
from clustergas.types import RunRecord, SizeHistogram
from clustergas.utils.rng import StreamFactory

logger = logging.getLogger(__name__)

T = TypeVar("T")


def run_ensemble(
    fn: Callable[[RunConfig, int], T],
    cfg: RunConfig,
    n_runs: int | None = None,
    workers: int | None = None,
    desc: str | None = None,
) -> list[T]:
    """Evaluates `fn(cfg, r)` for every run index, in order.

    Args:
        fn: Picklable top-level function of the config and run index.
        cfg: Run configuration.
        n_runs: Number of runs; defaults to `cfg.n_runs`.
        workers: Worker processes; defaults to `cfg.workers`. One runs in-process.
        desc: Progress bar label.

    Returns:
        One result per run, indexed by run.
    """
    n_runs = cfg.n_runs if n_runs is None else n_runs
    workers = cfg.workers if workers is None else workers
    label = desc or getattr(fn, "__name__", "runs")
    logger.log(xax.LOG_STATUS, "Starting %d %s on %d worker(s)", n_runs, label, workers)
    with xax.ContextTimer() as timer:
        if workers <= 1 or n_runs <= 1:
            results = [fn(cfg, r) for r in tqdm.trange(n_runs, desc=label, disable=n_runs < 2)]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                chunksize = max(1, n_runs // (4 * workers))
                mapped = pool.map(partial(fn, cfg), range(n_runs), chunksize=chunksize)
                results = list(tqdm.tqdm(mapped, total=n_runs, desc=label))
    elapsed = xax.format_timedelta(datetime.timedelta(seconds=timer.elapsed_time), short=True)
    logger.log(xax.LOG_STATUS, "Finished %d %s in %s", n_runs, label, elapsed)
    return results


def simulate_run(cfg: RunConfig, run_index: int) -> RunRecord:
    """Samples a configuration from stream `(seed, run_index)` and integrates it."""
    rng = StreamFactory(cfg.seed).stream(run_index)
    sampler = GrandCanonicalSampler(
        mu=resolved_mu(cfg),
        eps=cfg.epsilon,
        model=initial_model(cfg),
        mode=cfg.engine.sampler_mode,  # type: ignore[arg-type]
        retry_cap=cfg.engine.retry_cap,
        max_attempts=cfg.engine.max_attempts,
    )
    config, info = sampler(rng)
    if info.biased:
        logger.debug("Run %d used the biased sequential sampler (%d retries)", run_index, info.retries)
    engine = get_engine(
        cfg.engine.type,  # type: ignore[arg-type]
        max_collisions_per_particle=cfg.engine.max_collisions_per_particle,
    )
    record = engine.run(config, cfg.horizon, run_id=run_index)
    if cfg.engine.check_invariants:
        assert_invariants(record)
    return record


@dataclass(frozen=True)
class RunSummary:
    """Per-run reductions computed inside the worker."""

    run_id: int
    n: int
    collisions: int
    energy_drift: float
    momentum_drift: float
    size_law: SizeHistogram
    n_paths: int
    n_minimal: int
    n_recollisions: int
    largest_fraction: float
    mean_size: float
    functional_total: float
    mode_sums: np.ndarray
    cluster_rows: list[dict[str, Any]] = field(default_factory=list)
    record: RunRecord | None = None


def summarize_run(cfg: RunConfig, run_index: int) -> RunSummary:
    return summarize_record(cfg, simulate_run(cfg, run_index))


def summarize_record(cfg: RunConfig, record: RunRecord) -> RunSummary:
    """Reduces one run to its cluster statistics, functional total and density modes."""
    run_index = record.run_id
    mu = resolved_mu(cfg)
    graph = InteractionGraph.from_log(record.log, record.config.n)
    paths = partition_cluster_paths(graph, record.trajectories)
    final = record.final_configuration()
    e0 = record.config.kinetic_energy()
    functional = get_functional(cfg.expansion.functional, **cfg.expansion.functional_args)
    mode_sums = []
    for t in cfg.compare_times:
        positions = record.state_at(min(t, record.horizon)).positions
        mode_sums.append(fourier_modes(positions) * len(positions))
    return RunSummary(
        run_id=run_index,
        n=record.config.n,
        collisions=len(record.log),
        energy_drift=abs(final.kinetic_energy() - e0) / e0 if e0 > 0 else 0.0,
        momentum_drift=float(np.linalg.norm(final.momentum() - record.config.momentum())),
        size_law=cluster_size_law(paths, normalizer=mu),
        n_paths=len(paths),
        n_minimal=sum(p.is_minimal for p in paths),
        n_recollisions=sum(len(p.recollision_edges) for p in paths),
        largest_fraction=largest_cluster_fraction(paths),
        mean_size=mean_cluster_size(paths),
        functional_total=functional.on_paths(paths),
        mode_sums=np.stack(mode_sums) if mode_sums else np.zeros((0, 3)),
        cluster_rows=cluster_summary_rows(run_index, paths),
        record=record if cfg.output.dump_trajectories else None,
    )


@dataclass(frozen=True)
class AggregateSummary:
    """Aggregates formed by the cluster paths of two independent runs."""

    run_id: int
    n_aggregates: int
    n_nonminimal: int


def summarize_aggregates(cfg: RunConfig, pair_index: int) -> AggregateSummary:
    """Overlays runs `2r` and `2r + 1` and classifies every aggregate of their cluster paths."""
    paths = []
    for run_index in (2 * pair_index, 2 * pair_index + 1):
        record = simulate_run(cfg, run_index)
        graph = InteractionGraph.from_log(record.log, record.config.n)
        paths += partition_cluster_paths(graph, record.trajectories)
    components = aggregate_components(detect_overlaps(paths, cfg.epsilon, (0.0, cfg.horizon)))
    return AggregateSummary(
        run_id=pair_index,
        n_aggregates=len(components),
        n_nonminimal=sum(not aggregate_connectivity(og).is_min_aggregate for og in components),
    )


def merge_size_laws(laws: Sequence[SizeHistogram]) -> SizeHistogram:
    """Pairwise-tree merge of per-run size laws."""
    level = list(laws)
    if not level:
        return SizeHistogram.from_sizes([], normalizer=0.0, n_samples=0)
    while len(level) > 1:
        nxt = [level[k].merge(level[k + 1]) for k in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def _accumulate(values: Sequence[float]) -> Estimator:
    return merge_pairwise([Estimator.from_values([v]) for v in values])


def summarize_ensemble(summaries: Sequence[RunSummary]) -> dict[str, Estimator]:
    """Mean and error of the per-run scalars, merged in run order."""
    minimal_fraction = [s.n_minimal / s.n_paths if s.n_paths else 1.0 for s in summaries]
    return {
        "n": _accumulate([s.n for s in summaries]),
        "collisions": _accumulate([s.collisions for s in summaries]),
        "energy_drift": _accumulate([s.energy_drift for s in summaries]),
        "momentum_drift": _accumulate([s.momentum_drift for s in summaries]),
        "minimal_fraction": _accumulate(minimal_fraction),
        "recollisions": _accumulate([s.n_recollisions for s in summaries]),
        "largest_fraction": _accumulate([s.largest_fraction for s in summaries]),
        "mean_size": _accumulate([s.mean_size for s in summaries]),
        "functional_total": _accumulate([s.functional_total for s in summaries]),
    }
