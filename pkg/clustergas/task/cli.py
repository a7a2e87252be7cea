"""Command-line entry point.

Usage:

    clustergas <command> [--config PATH] [--seed N] [--runs N] [--workers N]
        [--format {csv,jsonl}] [--out DIR] [--dump-trajectories] [key.sub=value ...]

Exit status is 0 on success, 1 when an invariant or acceptance check fails and
2 when the configuration is invalid.
"""

__all__ = ["main", "build_parser", "COMMANDS"]

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import xax

from clustergas.config import (
    RunConfig,
    config_hash,
    config_to_yaml,
    default_workers,
    initial_model,
    load_config,
    resolved_mu,
)
from clustergas.errors import ConfigError, InvariantViolation
from clustergas.expansion import (
    cumulant_estimates,
    empirical_exponential_moment,
    estimate_aggregate_term,
    estimate_nu_integral,
)
from clustergas.functionals import get_functional
from clustergas.limits.coagulation import coagulation_run
from clustergas.limits.dsmc import dsmc_run, moment_names
from clustergas.task.compare import COAGULATION_STREAM, DSMC_STREAM, compare_models, crossover_rows
from clustergas.task.ensemble import (
    RunSummary,
    merge_size_laws,
    run_ensemble,
    simulate_run,
    summarize_ensemble,
    summarize_record,
    summarize_run,
)
from clustergas.task.validate import run_suites
from clustergas.types import RunRecord
from clustergas.utils.io import make_header, write_table, write_trajectories
from clustergas.utils.rng import StreamFactory

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


@dataclasses.dataclass(frozen=True)
class Context:
    cfg: RunConfig
    out: Path
    header: dict[str, Any]

    def write(self, name: str, rows: Sequence[dict[str, Any]], columns: Sequence[str] | None = None) -> Path:
        fmt = self.cfg.output.format
        path = write_table(self.out / name, rows, self.header, fmt, columns)  # type: ignore[arg-type]
        logger.info("Wrote %s", path)
        return path


def _collision_columns(dim: int) -> list[str]:
    return ["run_id", "t", "i", "j", *(f"omega{a}" for a in range(dim))]


def _collision_rows(record: RunRecord) -> list[dict[str, Any]]:
    rows = []
    for event in record.log:
        row: dict[str, Any] = {"run_id": record.run_id, "t": event.t, "i": event.i, "j": event.j}
        for a, w in enumerate(event.omega):
            row[f"omega{a}"] = float(w)
        rows.append(row)
    return rows


def _run_row(record: RunRecord) -> dict[str, Any]:
    e0 = record.config.kinetic_energy()
    final = record.final_configuration()
    return {
        "run_id": record.run_id,
        "n": record.config.n,
        "collisions": len(record.log),
        "cell_crossings": record.stats.cell_crossings,
        "stale_pops": record.stats.stale_pops,
        "peak_queue": record.stats.peak_queue,
        "energy_drift": abs(final.kinetic_energy() - e0) / e0 if e0 > 0 else 0.0,
        "momentum_drift": float(np.linalg.norm(final.momentum() - record.config.momentum())),
    }


def cmd_simulate(ctx: Context) -> int:
    records = run_ensemble(simulate_run, ctx.cfg, desc="simulate")
    summaries = [summarize_record(ctx.cfg, r) for r in records]
    ctx.write("runs", [_run_row(r) for r in records])
    collisions = [row for r in records for row in _collision_rows(r)]
    ctx.write("collisions", collisions, _collision_columns(ctx.cfg.dim))
    ctx.write("clusters", [row for s in summaries for row in s.cluster_rows])
    if ctx.cfg.output.dump_trajectories:
        write_trajectories(ctx.out, records, ctx.header, ctx.cfg.output.format)  # type: ignore[arg-type]
    total = sum(len(r.log) for r in records)
    xax.show_info(f"Simulated {len(records)} run(s) with {total} collisions", important=True)
    return EXIT_OK


def _size_law_rows(summaries: Sequence[RunSummary]) -> list[dict[str, Any]]:
    law = merge_size_laws([s.size_law for s in summaries])
    measure, freq, particles = law.measure(), law.frequency(), law.particle_fraction()
    return [
        {
            "size": size,
            "count": int(law.counts[size]),
            "measure": float(measure[size]),
            "frequency": float(freq[size]),
            "particle_fraction": float(particles[size]),
        }
        for size in range(1, len(law.counts))
        if law.counts[size]
    ]


def _estimator_rows(summaries: Sequence[RunSummary], **extra: Any) -> list[dict[str, Any]]:
    return [
        {**extra, "metric": name, "mean": est.mean, "stderr": est.stderr, "count": est.count}
        for name, est in summarize_ensemble(summaries).items()
    ]


def cmd_clusters(ctx: Context) -> int:
    cfg = ctx.cfg
    summaries = run_ensemble(summarize_run, cfg, desc="clusters")
    ctx.write("size_law", _size_law_rows(summaries))
    ctx.write("ensemble", _estimator_rows(summaries))

    horizons, fractions, errors = [], [], []
    sweep_rows: list[dict[str, Any]] = []
    for horizon in cfg.engine.sweep:
        sub = dataclasses.replace(cfg, horizon=horizon, compare_times=[])
        estimates = summarize_ensemble(run_ensemble(summarize_run, sub, desc=f"sweep T={horizon:g}"))
        largest = estimates["largest_fraction"]
        horizons.append(horizon)
        fractions.append(largest.mean)
        errors.append(largest.stderr)
        sweep_rows.append(
            {
                "horizon": horizon,
                "largest_fraction": largest.mean,
                "largest_fraction_stderr": largest.stderr,
                "mean_size": estimates["mean_size"].mean,
                "mean_size_stderr": estimates["mean_size"].stderr,
                "minimal_fraction": estimates["minimal_fraction"].mean,
                "recollisions": estimates["recollisions"].mean,
            }
        )
    status = EXIT_OK
    if sweep_rows:
        ctx.write("crossover", sweep_rows)
        monotone, crossover = crossover_rows(horizons, fractions, errors)
        ctx.write("crossover_metrics", [monotone.row(), crossover.row()])
        if crossover.passed:
            xax.show_info(f"Largest-cluster fraction crosses 0.5 at T={crossover.value:g}")
        else:
            xax.show_info("No crossover in the sweep")
        if not monotone.passed:
            xax.show_info(f"Largest-cluster fraction falls by {monotone.value:.3g} along the sweep", important=True)
            status = EXIT_FAILED

    if cfg.output.plots:
        from clustergas.utils.plotting import plot_crossover, plot_size_laws

        plot_size_laws({"md": merge_size_laws([s.size_law for s in summaries])}, ctx.out / "size_law.png")
        if sweep_rows:
            plot_crossover(np.array(horizons), np.array(fractions), np.array(errors), ctx.out / "crossover.png")

    mean_size = summarize_ensemble(summaries)["mean_size"]
    xax.show_info(f"Mean cluster size {mean_size.mean:.4f} +/- {mean_size.stderr:.2g}", important=True)
    return status


def _md_totals(cfg: RunConfig) -> np.ndarray:
    return np.array([s.functional_total for s in run_ensemble(summarize_run, cfg, desc="expansion runs")])


def cmd_expansion(ctx: Context) -> int:
    cfg = ctx.cfg
    exp = cfg.expansion
    model = initial_model(cfg)
    mu = resolved_mu(cfg)
    functional = get_functional(exp.functional, **exp.functional_args)
    rng = StreamFactory(cfg.seed).stream(0)
    rows: list[dict[str, Any]]
    match exp.job:
        case "nu":
            nu = estimate_nu_integral(
                exp.n,
                functional,
                cfg.epsilon,
                cfg.horizon,
                model,
                exp.n_samples,
                rng,
                deflection=exp.deflection,  # type: ignore[arg-type]
            )
            row = {k: v for k, v in dataclasses.asdict(nu).items() if k != "reasons"}
            row.update({f"reason_{k}": v for k, v in sorted(nu.reasons.items())})
            rows = [row]
        case "aggregate":
            agg = estimate_aggregate_term(
                len(exp.sizes),
                exp.sizes,
                functional,
                cfg.epsilon,
                cfg.horizon,
                model,
                exp.n_samples,
                rng,
                mu=mu,
                deflection=exp.deflection,  # type: ignore[arg-type]
            )
            row = dataclasses.asdict(agg)
            row["sizes"] = "-".join(str(s) for s in agg.sizes)
            row["remainder_ratio"] = agg.remainder_ratio
            rows = [row]
        case "lambda":
            mode = "characteristic" if exp.characteristic else "real"
            moment = empirical_exponential_moment(_md_totals(cfg), None, exp.u_grid, mu, mode=mode)
            rows = []
            for u, value, err in zip(moment.u, moment.values, moment.stderr):
                row = {"u": float(u), "value": float(np.real(value)), "stderr": float(err)}
                if exp.characteristic:
                    row["value_imag"] = float(np.imag(value))
                rows.append(row)
        case "cumulants":
            rows = [dataclasses.asdict(c) for c in cumulant_estimates(_md_totals(cfg), None, mu, exp.max_order)]
        case _:
            raise ConfigError("expansion.job", f"Unsupported job: {exp.job}")
    ctx.write(f"expansion_{exp.job}", rows)
    xax.show_info(f"Expansion job `{exp.job}` wrote {len(rows)} row(s)", important=True)
    return EXIT_OK


def cmd_dsmc(ctx: Context) -> int:
    cfg = ctx.cfg
    model = initial_model(cfg)
    result = dsmc_run(
        model,
        m=cfg.dsmc.m,
        cell_size=cfg.dsmc.cell_size,
        dt=cfg.dsmc.dt,
        horizon=cfg.horizon,
        rng=StreamFactory(cfg.seed).stream(DSMC_STREAM),
        cross_section=cfg.dsmc.cross_section,
        output_every=cfg.dsmc.output_every,
        majorant_factor=cfg.dsmc.majorant_factor,
    )
    ctx.write("dsmc_slabs", [{"t": s.t, **slab} for s in result.snapshots for slab in s.slabs])
    moment_rows = []
    names = moment_names(cfg.dim)
    for snap in result.snapshots:
        row: dict[str, Any] = {"t": snap.t}
        row.update({name: float(m) for name, m in zip(names, snap.moments)})
        row.update({f"{name}_stderr": float(e) for name, e in zip(names, snap.moment_errors)})
        row.update({f"mode{k + 1}": float(m) for k, m in enumerate(snap.modes)})
        moment_rows.append(row)
    ctx.write("dsmc_moments", moment_rows)
    if cfg.output.plots:
        from clustergas.utils.plotting import plot_mode_series

        plot_mode_series({"dsmc k=1": (result.times(), result.mode_series(0))}, ctx.out / "dsmc_modes.png")
    xax.show_info(f"DSMC: {result.collisions} collisions, {result.breaches} majorant breaches", important=True)
    return EXIT_OK


def cmd_coagulate(ctx: Context) -> int:
    cfg = ctx.cfg
    model = initial_model(cfg)
    result = coagulation_run(
        model,
        m=cfg.coagulation.m,
        cell_size=cfg.coagulation.cell_size,
        horizon=cfg.horizon,
        rng=StreamFactory(cfg.seed).stream(COAGULATION_STREAM),
        dt=cfg.coagulation.dt,
        merge_kernel=cfg.coagulation.merge_kernel,
        output_every=cfg.coagulation.output_every,
        majorant_factor=cfg.coagulation.majorant_factor,
    )
    ctx.write("coagulation_sizes", result.size_rows())
    ctx.write("coagulation_summary", result.summary_rows())
    rate, err = result.merge_rate(cfg.coagulation.rate_window)
    ctx.write("coagulation_rate", [{"window": cfg.coagulation.rate_window, "rate": rate, "stderr": err}])
    if cfg.output.plots:
        from clustergas.utils.plotting import plot_size_laws

        plot_size_laws({"coagulation": result.snapshots[-1].law}, ctx.out / "coagulation_size_law.png")
    xax.show_info(f"Coagulation: {result.merge_events} merges, {result.breaches} majorant breaches", important=True)
    return EXIT_OK


def cmd_compare(ctx: Context) -> int:
    rows = compare_models(ctx.cfg)
    ctx.write("compare", [r.row() for r in rows])
    failed = [r.metric for r in rows if not r.passed]
    if failed:
        xax.show_info(f"{len(failed)} of {len(rows)} metrics failed: {', '.join(failed)}", important=True)
        return EXIT_FAILED
    xax.show_info(f"All {len(rows)} metrics passed", important=True)
    return EXIT_OK


def cmd_validate(ctx: Context, full: bool = False) -> int:
    results = run_suites(ctx.cfg, full=full)
    ctx.write("validate", [r.row() for r in results])
    failed = [f"{r.suite}/{r.check}" for r in results if not r.passed]
    if failed:
        xax.show_info(f"Failing suites: {', '.join(failed)}", important=True)
        return EXIT_FAILED
    xax.show_info(f"All {len(results)} suites passed", important=True)
    return EXIT_OK


COMMANDS: dict[str, tuple[Callable[..., int], str]] = {
    "simulate": (cmd_simulate, "Run the hard-sphere dynamics and write collision logs and cluster summaries."),
    "clusters": (cmd_clusters, "Ensemble cluster statistics and the largest-cluster sweep."),
    "expansion": (cmd_expansion, "Cluster-expansion estimator jobs."),
    "dsmc": (cmd_dsmc, "Direct simulation Monte Carlo for the Boltzmann limit."),
    "coagulate": (cmd_coagulate, "Stochastic coagulation of limiting cluster paths."),
    "compare": (cmd_compare, "Cross-model acceptance table."),
    "validate": (cmd_validate, "Deterministic oracle suites."),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clustergas", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub = commands.add_parser(name, help=help_text, description=help_text)
        sub.add_argument("--config", type=Path, default=None, help="YAML or JSON configuration file")
        sub.add_argument("--seed", type=int, default=None, help="Root seed")
        sub.add_argument("--runs", type=int, default=None, help="Number of independent runs")
        sub.add_argument("--workers", type=int, default=None, help="Worker processes (default: $CLUSTER_GAS_WORKERS)")
        sub.add_argument("--format", choices=["csv", "jsonl"], default=None, help="Output table format")
        sub.add_argument("--out", type=Path, default=None, help="Output directory")
        sub.add_argument("--dump-trajectories", action="store_true", help="Write every particle breakpoint")
        sub.add_argument("--log-level", default="INFO", help="Root logger level")
        sub.add_argument("overrides", nargs="*", help="Dotlist overrides such as `dsmc.dt=0.005`")
        if name == "validate":
            sub.add_argument("--full", action="store_true", help="Run the exhaustive k <= 6 suites")
    return parser


def _load(args: argparse.Namespace) -> RunConfig:
    overrides = list(args.overrides)
    if args.format is not None:
        overrides.append(f"output.format={args.format}")
    if args.out is not None:
        overrides.append(f"output.out={args.out}")
    if args.dump_trajectories:
        overrides.append("output.dump_trajectories=true")
    workers = args.workers if args.workers is not None else default_workers()
    return load_config(args.config, overrides, seed=args.seed, n_runs=args.runs, workers=workers)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
    except ConfigError as e:
        logger.error("Invalid configuration %s", e)
        return EXIT_CONFIG

    from clustergas import __version__

    out = Path(cfg.output.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(config_to_yaml(cfg), encoding="utf-8")
    header = make_header(config_hash(cfg), cfg.seed, __version__, cfg.output.timestamp, command=args.command)
    ctx = Context(cfg=cfg, out=out, header=header)
    fn, _ = COMMANDS[args.command]
    try:
        with xax.ContextTimer() as timer:
            status = fn(ctx, full=args.full) if args.command == "validate" else fn(ctx)
    except InvariantViolation as e:
        logger.error("Invariant violation: %s", e)
        return EXIT_FAILED
    except ConfigError as e:
        logger.error("Invalid configuration %s", e)
        return EXIT_CONFIG
    logger.info("`%s` finished in %.2fs with status %d", args.command, timer.elapsed_time, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
