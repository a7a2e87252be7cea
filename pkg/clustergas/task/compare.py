"""Cross-model acceptance metrics behind the `compare` command.

Each metric is a row `metric, value, stderr, threshold, passed`. Differences
between two Monte Carlo estimates pass when they sit within three combined
standard errors; exact invariants pass below a fixed tolerance.
"""

__all__ = [
    "MetricRow",
    "mode_rows",
    "size_law_rows",
    "merge_rate_row",
    "drift_rows",
    "dsmc_energy_row",
    "mollification_row",
    "scaling_rows",
    "trend_row",
    "crossover_rows",
    "dsmc_equilibrium_rows",
    "tube_rows",
    "suppression_rows",
    "two_body_rows",
    "epsilon_sweep",
    "compare_models",
]

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from clustergas.config import RunConfig, initial_model, resolved_mu
from clustergas.expansion import DeflectionMode, estimate_nu_integral, singleton_overlap_probability
from clustergas.geometry import ball_volume
from clustergas.limits.coagulation import CoagulationResult, coagulation_run, total_variation
from clustergas.limits.dsmc import DsmcResult, dsmc_run, moment_names
from clustergas.sampler import InitialModel
from clustergas.stats import decay_exponent, jackknife
from clustergas.task.ensemble import (
    RunSummary,
    merge_size_laws,
    run_ensemble,
    summarize_aggregates,
    summarize_ensemble,
    summarize_run,
)
from clustergas.types import SizeHistogram
from clustergas.utils.oracles import expected_merge_rate, tube_rejection_oracle, tube_volume, two_body_nu_limit
from clustergas.utils.rng import StreamFactory

logger = logging.getLogger(__name__)

# Stream indices reserved for the limit models, far from any run index.
DSMC_STREAM = 2**31 - 1
COAGULATION_STREAM = 2**31 - 2
EQUILIBRIUM_STREAM = 2**31 - 4
TUBE_STREAM = 2**31 - 5
TWO_BODY_STREAM = 2**31 - 6

TUBE_EPS = 0.01
TUBE_HORIZON = 0.2
AGGREGATE_PAIRS = 100


@dataclass(frozen=True)
class MetricRow:
    metric: str
    value: float
    stderr: float
    threshold: float
    passed: bool

    def row(self) -> dict[str, object]:
        return dataclasses.asdict(self)


def _within(metric: str, diff: float, stderr: float, slack: float = 0.0) -> MetricRow:
    threshold = slack + 3.0 * stderr
    return MetricRow(metric=metric, value=diff, stderr=stderr, threshold=threshold, passed=abs(diff) <= threshold)


def mode_rows(
    summaries: Sequence[RunSummary],
    dsmc: DsmcResult,
    dsmc_particles: int,
    times: Sequence[float],
) -> list[MetricRow]:
    """MD minus DSMC density modes at each comparison time.

    The MD mode is a ratio estimator over runs; the DSMC mode of `M` particles
    carries a standard error of about `sqrt(1 / 2M)`.
    """
    counts = np.array([s.n for s in summaries], dtype=np.float64)
    sums = np.stack([s.mode_sums for s in summaries])
    dsmc_times = dsmc.times()
    rows = []
    for a, t in enumerate(times):
        snap = dsmc.snapshots[int(np.argmin(np.abs(dsmc_times - t)))]
        for k in range(sums.shape[2]):
            data = np.stack([sums[:, a, k], counts], axis=1)
            md, md_err = jackknife(data, lambda s: float(s[:, 0].sum() / max(s[:, 1].sum(), 1.0)))
            dsmc_value = float(snap.modes[k])
            dsmc_err = math.sqrt(0.5 / max(dsmc_particles, 1))
            rows.append(_within(f"mode_k{k + 1}_t{t:g}", float(md) - dsmc_value, math.hypot(md_err, dsmc_err)))
    return rows


def _particle_fractions(laws: Sequence[SizeHistogram], size: int) -> np.ndarray:
    out = np.zeros((len(laws), size))
    for r, law in enumerate(laws):
        weighted = law.counts * law.sizes
        out[r, : len(weighted)] = weighted
    return out


def size_law_rows(summaries: Sequence[RunSummary], coagulation: CoagulationResult) -> list[MetricRow]:
    """Total variation between the MD and coagulation particle-weighted size laws."""
    final = coagulation.snapshots[-1].law
    laws = [s.size_law for s in summaries]
    merged = merge_size_laws(laws)
    size = max(len(merged.counts), len(final.counts))
    weighted = _particle_fractions(laws, size)
    reference = np.pad(final.particle_fraction(), (0, size - len(final.counts)))

    def statistic(w: np.ndarray) -> float:
        total = w.sum()
        frac = w.sum(axis=0) / total if total else np.zeros(size)
        return 0.5 * float(np.abs(frac - reference).sum())

    _, md_err = jackknife(weighted, statistic)
    coag_err = 0.5 * float(np.sqrt(reference * (1 - reference) / max(final.total_particles, 1)).sum())
    stderr = math.hypot(md_err, coag_err)
    tv = total_variation(merged, final)
    rows = [
        MetricRow(
            metric="size_law_tv",
            value=tv,
            stderr=stderr,
            threshold=0.05 + 3 * stderr,
            passed=tv <= 0.05 + 3 * stderr,
        )
    ]
    md_mean = np.array([s.mean_size for s in summaries])
    rows.append(
        MetricRow(
            metric="md_mean_cluster_size",
            value=float(md_mean.mean()),
            stderr=float(md_mean.std(ddof=1) / math.sqrt(len(md_mean))) if len(md_mean) > 1 else math.inf,
            threshold=2.0,
            passed=float(md_mean.mean()) < 2.0,
        )
    )
    return rows


def merge_rate_row(coagulation: CoagulationResult, cfg: RunConfig) -> MetricRow:
    rate, err = coagulation.merge_rate(cfg.coagulation.rate_window)
    expected = expected_merge_rate(cfg.coagulation.m, initial_model(cfg))
    return _within("coagulation_initial_rate", rate - expected, err)


def drift_rows(summaries: Sequence[RunSummary], tol: float = 1e-9) -> list[MetricRow]:
    energy = max((s.energy_drift for s in summaries), default=0.0)
    momentum = max((s.momentum_drift / max(s.n, 1) for s in summaries), default=0.0)
    return [
        MetricRow(metric="md_energy_drift", value=energy, stderr=0.0, threshold=tol, passed=energy <= tol),
        MetricRow(metric="md_momentum_drift", value=momentum, stderr=0.0, threshold=tol, passed=momentum <= tol),
    ]


def _at_epsilon(cfg: RunConfig, eps: float) -> RunConfig:
    return dataclasses.replace(cfg, epsilon=eps, mu=None)


def epsilon_sweep(cfg: RunConfig, epsilons: Sequence[float]) -> dict[float, list[RunSummary]]:
    """MD run summaries at each diameter, with the activity following the diameter."""
    return {
        eps: run_ensemble(summarize_run, _at_epsilon(cfg, eps), desc=f"sweep eps={eps:g}")
        for eps in sorted(epsilons, reverse=True)
    }


def scaling_rows(
    cfg: RunConfig,
    epsilons: Sequence[float],
    sweep: dict[float, list[RunSummary]] | None = None,
) -> list[MetricRow]:
    """Decay exponents in mu of the variance and third cumulant of the empirical measure."""
    if len(epsilons) < 3:
        return []
    sweep = epsilon_sweep(cfg, epsilons) if sweep is None else sweep
    mus, variances, var_errs, thirds, third_errs = [], [], [], [], []
    for eps in epsilons:
        sub = _at_epsilon(cfg, eps)
        totals = np.array([s.functional_total for s in sweep[eps]])
        mu = resolved_mu(sub)
        var, var_err = jackknife(totals, lambda s: float(np.var(s, ddof=1)))
        k3, k3_err = jackknife(totals, lambda s: float(np.mean((s - s.mean()) ** 3)))
        mus.append(mu)
        variances.append(float(var) / mu**2)
        var_errs.append(var_err / mu**2)
        thirds.append(float(k3) / mu**3)
        third_errs.append(k3_err / mu**3)
    rows = []
    for name, values, errors, (low, high) in (
        ("variance_exponent", variances, var_errs, (-1.2, -0.8)),
        ("third_cumulant_exponent", thirds, third_errs, (-2.4, -1.6)),
    ):
        try:
            fit = decay_exponent(mus, values, errors)
        except ValueError as e:
            logger.warning("Skipping %s: %s", name, e)
            continue
        rows.append(
            MetricRow(
                metric=name,
                value=fit.slope,
                stderr=fit.stderr,
                threshold=high - low,
                passed=fit.within(low, high),
            )
        )
    return rows


def trend_row(
    metric: str,
    values: Sequence[float],
    errors: Sequence[float],
    increasing: bool,
    sigmas: float = 2.0,
) -> MetricRow:
    """Worst step against the expected direction between consecutive estimates.

    `value` is how far that step goes the wrong way. The row fails when it
    exceeds `sigmas` combined standard errors.
    """
    sign = 1.0 if increasing else -1.0
    worst = MetricRow(metric=metric, value=0.0, stderr=0.0, threshold=0.0, passed=True)
    excess = -math.inf
    for k in range(len(values) - 1):
        step = sign * (values[k] - values[k + 1])
        err = math.hypot(errors[k], errors[k + 1])
        threshold = sigmas * err
        if step - threshold > excess:
            excess = step - threshold
            worst = MetricRow(metric=metric, value=step, stderr=err, threshold=threshold, passed=step <= threshold)
    return worst


def crossover_rows(
    horizons: Sequence[float],
    fractions: Sequence[float],
    errors: Sequence[float],
    level: float = 0.5,
) -> list[MetricRow]:
    """Monotonicity of the largest-cluster fraction in T, and the first T where it reaches `level`.

    The crossover row fails only when the sweep never reaches `level`; its
    value is then NaN.
    """
    order = np.argsort(horizons, kind="stable")
    ts = [float(horizons[k]) for k in order]
    fs = [float(fractions[k]) for k in order]
    es = [float(errors[k]) for k in order]
    crossing = next((t for t, f in zip(ts, fs) if f >= level), math.nan)
    return [
        trend_row("largest_fraction_monotone", fs, es, increasing=True),
        MetricRow(
            metric="largest_fraction_crossover",
            value=crossing,
            stderr=0.0,
            threshold=level,
            passed=not math.isnan(crossing),
        ),
    ]


def dsmc_equilibrium_rows(
    cfg: RunConfig,
    rng: np.random.Generator,
    horizon: float = 1.0,
    m: int | None = None,
) -> list[MetricRow]:
    """Drift of every velocity moment of DSMC started from a uniform Maxwellian.

    Each final-minus-initial difference passes within three combined
    jackknife standard errors.
    """
    model = InitialModel(dim=cfg.dim, beta=cfg.beta)
    result = dsmc_run(
        model,
        m=cfg.dsmc.m if m is None else m,
        cell_size=cfg.dsmc.cell_size,
        dt=cfg.dsmc.dt,
        horizon=horizon,
        rng=rng,
        cross_section=cfg.dsmc.cross_section,
        output_every=max(1, int(round(horizon / cfg.dsmc.dt))),
        majorant_factor=cfg.dsmc.majorant_factor,
    )
    first, last = result.snapshots[0], result.snapshots[-1]
    return [
        _within(
            f"dsmc_equilibrium_{name}",
            float(last.moments[c] - first.moments[c]),
            math.hypot(first.moment_errors[c], last.moment_errors[c]),
        )
        for c, name in enumerate(moment_names(cfg.dim))
    ]


def tube_rows(
    eps: float,
    speed: float,
    horizon: float,
    n_samples: int,
    rng: np.random.Generator,
    dim: int = 2,
) -> list[MetricRow]:
    """Two-singleton overlap probability from the engine, against the rejection oracle and the swept tube.

    The moving particle travels along the first axis. Conditioning on no
    initial overlap divides the tube volume by `1 - |B_eps|`.
    """
    w = np.zeros(dim)
    w[0] = speed
    md, md_err = singleton_overlap_probability(eps, w, horizon, n_samples, rng)
    oracle, oracle_err = tube_rejection_oracle(eps, w, horizon, n_samples, rng)
    exact = tube_volume(eps, speed, horizon, dim) / (1.0 - ball_volume(dim) * eps**dim)
    logger.info("Singleton overlap %.5f (engine) vs %.5f (oracle) vs %.5f (tube)", md, oracle, exact)
    return [
        _within("singleton_overlap_vs_oracle", md - oracle, math.hypot(md_err, oracle_err)),
        _within("singleton_overlap_vs_tube", md - exact, md_err),
    ]


def suppression_rows(
    cfg: RunConfig,
    epsilons: Sequence[float],
    sweep: dict[float, list[RunSummary]] | None = None,
) -> list[MetricRow]:
    """Share of non-minimal cluster paths and aggregates as the diameter shrinks.

    Cluster paths are non-minimal when they contain a recollision; aggregates
    when their overlap graph has a cycle or a time-zero overlap. Both shares
    should not grow as the diameter decreases, within two standard errors.
    Aggregates are formed by overlaying pairs of independent runs.
    """
    if len(epsilons) < 2:
        return []
    sweep = epsilon_sweep(cfg, epsilons) if sweep is None else sweep
    rows = []
    paths, path_errs, aggregates, aggregate_errs = [], [], [], []
    for eps in sorted(epsilons, reverse=True):
        minimal = summarize_ensemble(sweep[eps])["minimal_fraction"]
        sub = _at_epsilon(cfg, eps)
        n_pairs = min(max(2, sub.n_runs // 2), AGGREGATE_PAIRS)
        pairs = run_ensemble(summarize_aggregates, sub, n_runs=n_pairs, desc=f"aggregates eps={eps:g}")
        counts = np.array([[p.n_nonminimal, p.n_aggregates] for p in pairs], dtype=np.float64)
        share, share_err = jackknife(counts, lambda s: float(s[:, 0].sum() / max(s[:, 1].sum(), 1.0)))
        paths.append(1.0 - minimal.mean)
        path_errs.append(minimal.stderr)
        aggregates.append(float(share))
        aggregate_errs.append(share_err)
        for name, value, err in (
            ("nonminimal_path_fraction", paths[-1], path_errs[-1]),
            ("nonminimal_aggregate_fraction", aggregates[-1], aggregate_errs[-1]),
        ):
            rows.append(
                MetricRow(metric=f"{name}_eps{eps:g}", value=value, stderr=err, threshold=1.0, passed=value <= 1.0)
            )
    rows.append(trend_row("nonminimal_path_fraction_trend", paths, path_errs, increasing=False))
    rows.append(trend_row("nonminimal_aggregate_fraction_trend", aggregates, aggregate_errs, increasing=False))
    return rows


def two_body_rows(
    model: InitialModel,
    horizon: float,
    epsilons: Sequence[float],
    n_samples: int,
    rng: np.random.Generator,
    deflection: DeflectionMode = "uniform",
) -> list[MetricRow]:
    """Approach of the size-two mass to its zero-diameter limit.

    The gap to the limit must shrink with the diameter, within two standard
    errors per step, and the smallest diameter must sit within three.
    """
    if not epsilons:
        return []
    limit = two_body_nu_limit(model, horizon)
    gaps, errs = [], []
    for eps in sorted(epsilons, reverse=True):
        est = estimate_nu_integral(2, None, eps, horizon, model, n_samples, rng, deflection=deflection)
        gaps.append(abs(est.estimate - limit))
        errs.append(est.stderr)
        logger.info("nu_2(eps=%g) = %.5f +/- %.2g (limit %.5f)", eps, est.estimate, est.stderr, limit)
    return [
        trend_row("two_body_gap_trend", gaps, errs, increasing=False),
        _within("two_body_final_gap", gaps[-1], errs[-1]),
    ]


def dsmc_energy_row(dsmc: DsmcResult, tol: float = 1e-9) -> MetricRow:
    moments = dsmc.moment_series()
    energy = moments[:, -2]
    drift = float(np.max(np.abs(energy - energy[0])) / energy[0]) if energy[0] > 0 else 0.0
    return MetricRow(metric="dsmc_energy_drift", value=drift, stderr=0.0, threshold=tol, passed=drift <= tol)


def mollification_row(coarse: CoagulationResult, fine: CoagulationResult) -> MetricRow:
    """Size-law distance between coagulation runs whose cells differ by a factor of two."""
    law_a, law_b = coarse.snapshots[-1].law, fine.snapshots[-1].law
    size = max(len(law_a.counts), len(law_b.counts))
    p = np.pad(law_a.particle_fraction(), (0, size - len(law_a.counts)))
    q = np.pad(law_b.particle_fraction(), (0, size - len(law_b.counts)))
    var = p * (1 - p) / max(law_a.total_particles, 1) + q * (1 - q) / max(law_b.total_particles, 1)
    stderr = 0.5 * float(np.sqrt(var).sum())
    tv = total_variation(law_a, law_b)
    threshold = 0.05 + 3 * stderr
    return MetricRow(metric="mollification_tv", value=tv, stderr=stderr, threshold=threshold, passed=tv <= threshold)


def compare_models(cfg: RunConfig, epsilons: Sequence[float] | None = None) -> list[MetricRow]:
    """Runs the MD ensemble and both limit models, and tabulates their agreement.

    Everything is recomputed from `cfg`, so the table only depends on the
    configuration and seed. `epsilons` defaults to `cfg.compare_epsilons`; with
    fewer than three values the scaling fits are skipped, with fewer than two
    the suppression trends too, and without any the two-body limit.
    """
    model = initial_model(cfg)
    streams = StreamFactory(cfg.seed)
    summaries = run_ensemble(summarize_run, cfg, desc="md runs")
    dsmc = dsmc_run(
        model,
        m=cfg.dsmc.m,
        cell_size=cfg.dsmc.cell_size,
        dt=cfg.dsmc.dt,
        horizon=cfg.horizon,
        rng=streams.stream(DSMC_STREAM),
        cross_section=cfg.dsmc.cross_section,
        output_every=cfg.dsmc.output_every,
        majorant_factor=cfg.dsmc.majorant_factor,
    )
    coagulation, fine = (
        coagulation_run(
            model,
            m=cfg.coagulation.m,
            cell_size=cell_size,
            horizon=cfg.horizon,
            rng=streams.stream(stream),
            dt=cfg.coagulation.dt,
            merge_kernel=cfg.coagulation.merge_kernel,
            output_every=cfg.coagulation.output_every,
            majorant_factor=cfg.coagulation.majorant_factor,
        )
        for cell_size, stream in (
            (cfg.coagulation.cell_size, COAGULATION_STREAM),
            (cfg.coagulation.cell_size / 2, COAGULATION_STREAM - 1),
        )
    )
    rows = drift_rows(summaries)
    rows.append(dsmc_energy_row(dsmc))
    rows += mode_rows(summaries, dsmc, cfg.dsmc.m, cfg.compare_times)
    rows += size_law_rows(summaries, coagulation)
    rows.append(mollification_row(coagulation, fine))
    rows.append(merge_rate_row(coagulation, cfg))
    rows += dsmc_equilibrium_rows(cfg, streams.stream(EQUILIBRIUM_STREAM))
    rows += tube_rows(TUBE_EPS, 1.0, TUBE_HORIZON, cfg.expansion.n_samples, streams.stream(TUBE_STREAM), dim=cfg.dim)
    sweep_epsilons = list(cfg.compare_epsilons if epsilons is None else epsilons)
    sweep = epsilon_sweep(cfg, sweep_epsilons) if len(sweep_epsilons) >= 2 else {}
    rows += scaling_rows(cfg, sweep_epsilons, sweep=sweep)
    rows += suppression_rows(cfg, sweep_epsilons, sweep=sweep)
    rows += two_body_rows(
        model,
        cfg.horizon,
        sweep_epsilons,
        cfg.expansion.n_samples,
        streams.stream(TWO_BODY_STREAM),
        deflection=cfg.expansion.deflection,  # type: ignore[arg-type]
    )
    for row in rows:
        logger.info("%s = %.6g +/- %.2g (%s)", row.metric, row.value, row.stderr, "pass" if row.passed else "FAIL")
    return rows
