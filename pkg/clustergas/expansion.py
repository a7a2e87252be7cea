"""Monte Carlo estimators for the cluster expansion.

Minimal cluster paths are sampled in tree coordinates: an ordered tree, a
root, initial velocities, ordered collision times and contact normals. The
path is rebuilt forward in time and replayed with the exact dynamics; the
sample counts only if the replay realizes exactly the prescribed clustering
collisions. Cross-section factors and initial densities enter the weight.

All per-volume quantities are divided by the activity, so a size-`n`
estimate is `(1/n!) sum_T int dy dV dTheta dOmega prod (approach)_+ F 1_compat`
with `F = exp(H) prod f0`. The one-particle value with `H = 0` is 1.
"""

__all__ = [
    "DeflectionMode",
    "WeightedSample",
    "NuEstimate",
    "AggregateEstimate",
    "AggregateSample",
    "ExponentialMoment",
    "CumulantEstimate",
    "reconstruct_cluster_path",
    "sample_tree_params",
    "estimate_nu_integral",
    "evaluate_aggregate",
    "singleton_overlap_probability",
    "estimate_aggregate_term",
    "empirical_exponential_moment",
    "cumulant_estimates",
    "empirical_covariance",
]

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.special
import scipy.stats
from jaxtyping import Float

from clustergas.clusters import (
    ClusterPath,
    DecoratedTreeParams,
    InteractionGraph,
    aggregate_connectivity,
    detect_overlaps,
    partition_cluster_paths,
)
from clustergas.engine import NaiveEngine
from clustergas.errors import OverflowGuard, SizeLimit
from clustergas.functionals import TestFunctional, functional_totals
from clustergas.geometry import (
    approach_speed,
    kappa,
    sample_impact_vector,
    sample_unit_vector,
    scatter,
    sphere_area,
    wrap,
)
from clustergas.sampler import InitialModel, maxwellian_density, sample_maxwellian
from clustergas.stats import Estimator, jackknife
from clustergas.trees import ORDERED_TREE_MAX_N, ordered_tree_count, phi, sample_ordered_tree
from clustergas.types import Configuration, RunRecord

logger = logging.getLogger(__name__)

DeflectionMode = Literal["uniform", "proportional"]

CONTACT_TIME_RTOL = 1e-9
EXPONENT_LIMIT = 700.0
AGGREGATE_MAX_PARTICLES = 8


@dataclass(frozen=True)
class WeightedSample:
    """Outcome of rebuilding one cluster path from tree coordinates.

    `reason` is None for compatible samples, `outgoing` when a prescribed
    contact has no approach speed, and otherwise names why the replay
    differs from the prescription.
    """

    params: DecoratedTreeParams
    weight: float
    compatible: bool
    reason: str | None = None
    config: Configuration | None = None
    path: ClusterPath | None = None


def reconstruct_cluster_path(
    params: DecoratedTreeParams,
    eps: float,
    horizon: float,
    model: InitialModel | None = None,
    proposal_density: float = 1.0,
) -> WeightedSample:
    """Builds the time-zero data realizing the prescribed clustering collisions.

    Edges are processed in time order. At each edge the component holding the
    second particle is translated rigidly so the pair touches with normal
    `omega`, then the pair scatters. Finally the whole group is shifted so its
    time-zero center of mass is `y`, and the dynamics are replayed.

    Args:
        params: Tree coordinates.
        eps: Sphere diameter.
        horizon: Final time T; every collision time must lie in `(0, T]`.
        model: Initial density; when given, `f0` factors enter the weight.
        proposal_density: Density of `params` under the sampler that drew it.

    Returns:
        The weighted sample, with zero weight unless compatible.
    """
    n, dim = params.n, params.dim
    if len(params.times) and params.times[-1] > horizon:
        raise ValueError(f"Collision time {params.times[-1]} exceeds horizon {horizon}")

    velocities = params.velocities.astype(np.float64).copy()
    x0 = np.zeros((n, dim))
    disp = np.zeros((n, dim))
    component = list(range(n))
    t_prev = 0.0
    cross_section = 1.0
    for (a, b), tau, omega in zip(params.tree.edges, params.times, params.omegas):
        disp += velocities * (tau - t_prev)
        t_prev = float(tau)
        cross_section *= approach_speed(velocities[a] - velocities[b], omega)
        target = x0[a] + disp[a] - eps * omega
        shift = target - (x0[b] + disp[b])
        moved = component[b]
        keep = component[a]
        for k in range(n):
            if component[k] == moved:
                x0[k] += shift
                component[k] = keep
        velocities[a], velocities[b] = scatter(velocities[a], velocities[b], omega)

    if cross_section == 0.0:
        return WeightedSample(params=params, weight=0.0, compatible=False, reason="outgoing")

    positions = wrap(x0 - x0.mean(axis=0) + params.y)
    config = Configuration(positions=positions, velocities=params.velocities.astype(np.float64).copy(), eps=eps)
    if not config.satisfies_hard_core(rtol=0.0):
        return WeightedSample(params=params, weight=0.0, compatible=False, reason="time_zero_overlap", config=config)

    record = NaiveEngine().run(config, horizon)
    expected = list(zip(params.tree.edges, params.times))
    if len(record.log) != len(expected):
        reason = "extra_collision" if len(record.log) > len(expected) else "missing_collision"
        return WeightedSample(params=params, weight=0.0, compatible=False, reason=reason, config=config)
    for event, (pair, tau) in zip(record.log, expected):
        if event.pair != pair or not math.isclose(event.t, tau, rel_tol=CONTACT_TIME_RTOL, abs_tol=1e-12):
            return WeightedSample(params=params, weight=0.0, compatible=False, reason="order_mismatch", config=config)

    density = 1.0
    if model is not None:
        density = float(np.prod(model.f0(config.positions, config.velocities)))
    (path,) = partition_cluster_paths(InteractionGraph.from_log(record.log, n), record.trajectories)
    return WeightedSample(
        params=params,
        weight=cross_section * density / proposal_density,
        compatible=True,
        config=config,
        path=path,
    )


def sample_tree_params(
    n: int,
    dim: int,
    horizon: float,
    beta_ref: float,
    rng: np.random.Generator,
    deflection: DeflectionMode = "uniform",
) -> tuple[DecoratedTreeParams, float]:
    """Draws tree coordinates from the importance proposal.

    The root is uniform on the torus, velocities are Maxwellian at
    `beta_ref`, collision times are uniform on the ordered simplex and the
    tree is uniform over ordered trees. Normals are uniform on the sphere, or
    proportional to the approach speed in `proportional` mode.

    Returns:
        The parameters and their proposal density.
    """
    tree = sample_ordered_tree(n, rng)
    y = rng.random(dim)
    velocities = sample_maxwellian(beta_ref, rng, dim=dim, size=n)
    times = np.sort(rng.random(n - 1) * horizon)
    density = float(np.prod(maxwellian_density(velocities, beta_ref)))
    density *= math.factorial(n - 1) / horizon ** (n - 1) / ordered_tree_count(n)

    v = velocities.copy()
    omegas = np.zeros((n - 1, dim))
    for e, (a, b) in enumerate(tree.edges):
        w = v[a] - v[b]
        match deflection:
            case "uniform":
                omegas[e] = sample_unit_vector(dim, rng)
                density /= sphere_area(dim)
            case "proportional":
                omegas[e] = sample_impact_vector(w, rng)
                speed = float(np.linalg.norm(w))
                density *= approach_speed(w, omegas[e]) / (kappa(dim) * speed) if speed > 0 else 1.0 / sphere_area(dim)
            case _:
                raise ValueError(f"Unsupported deflection mode: {deflection}")
        v[a], v[b] = scatter(v[a], v[b], omegas[e])
    params = DecoratedTreeParams(n=n, tree=tree, y=y, velocities=velocities, times=times, omegas=omegas)
    return params, density


@dataclass(frozen=True)
class NuEstimate:
    n: int
    estimate: float
    stderr: float
    n_samples: int
    compat_rate: float
    reasons: dict[str, int] = field(default_factory=dict)


def _draw_weighted_path(
    n: int,
    eps: float,
    horizon: float,
    model: InitialModel,
    rng: np.random.Generator,
    deflection: DeflectionMode,
) -> WeightedSample:
    beta_ref = model.beta / 2
    params, density = sample_tree_params(n, model.dim, horizon, beta_ref, rng, deflection)
    if density == 0.0:
        return WeightedSample(params=params, weight=0.0, compatible=False, reason="outgoing")
    return reconstruct_cluster_path(params, eps, horizon, model=model, proposal_density=density)


def _path_factor(sample: WeightedSample, functional: TestFunctional | None) -> float:
    if not sample.compatible or sample.path is None:
        return 0.0
    h = 0.0 if functional is None else functional.on_path(sample.path)
    if abs(h) > EXPONENT_LIMIT:
        raise OverflowGuard(f"Functional value {h} is too large to exponentiate")
    return sample.weight * math.exp(h) / math.factorial(sample.params.n)


def _compat_rate(reasons: Counter) -> float:
    counted = sum(c for r, c in reasons.items() if r != "outgoing")
    return reasons["compatible"] / counted if counted else float("nan")


def estimate_nu_integral(
    n: int,
    functional: TestFunctional | None,
    eps: float,
    horizon: float,
    model: InitialModel,
    n_samples: int,
    rng: np.random.Generator,
    deflection: DeflectionMode = "uniform",
) -> NuEstimate:
    """Per-volume mass of minimal size-`n` cluster paths, weighted by `exp(H)`.

    Args:
        n: Cluster size.
        functional: Test functional H, or None for H = 0.
        eps: Sphere diameter.
        horizon: Final time T.
        model: Initial density.
        n_samples: Number of importance samples.
        rng: Random stream.
        deflection: How contact normals are proposed.

    Returns:
        Mean, standard error and compatibility diagnostics.
    """
    if n < 1:
        raise ValueError(f"`{n=}` must be positive")
    if n > ORDERED_TREE_MAX_N:
        raise SizeLimit(f"Cluster sizes up to {ORDERED_TREE_MAX_N} are supported, got {n}")
    if functional is not None:
        functional.check_growth(model.beta)
    est = Estimator()
    reasons: Counter = Counter()
    for _ in range(n_samples):
        sample = _draw_weighted_path(n, eps, horizon, model, rng, deflection)
        reasons["compatible" if sample.compatible else str(sample.reason)] += 1
        est.push(_path_factor(sample, functional))
    rate = _compat_rate(reasons)
    logger.debug("nu(n=%d, eps=%g): compatibility %.4f over %d samples", n, eps, rate, n_samples)
    return NuEstimate(
        n=n,
        estimate=est.mean,
        stderr=est.stderr,
        n_samples=n_samples,
        compat_rate=rate,
        reasons=dict(reasons),
    )


@dataclass(frozen=True)
class AggregateSample:
    minimal: float
    remainder: float
    connected: bool
    is_min_aggregate: bool


def evaluate_aggregate(
    paths: Sequence[ClusterPath],
    factors: Sequence[float],
    eps: float,
    horizon: float,
    mu: float,
) -> AggregateSample:
    """Contribution of one family of independently drawn cluster paths.

    The minimal part carries `(-1)^(k-1)` when the overlap graph is a tree
    without time-zero overlaps; any other connected overlap graph goes to the
    remainder with its exact `phi`.
    """
    k = len(paths)
    prefactor = mu ** (k - 1) / math.factorial(k) * math.prod(factors)
    if prefactor == 0.0:
        return AggregateSample(minimal=0.0, remainder=0.0, connected=False, is_min_aggregate=False)
    og = detect_overlaps(paths, eps, (0.0, horizon))
    conn = aggregate_connectivity(og)
    if not conn.connected:
        return AggregateSample(minimal=0.0, remainder=0.0, connected=False, is_min_aggregate=False)
    if conn.is_min_aggregate:
        return AggregateSample(minimal=prefactor * conn.phi_min, remainder=0.0, connected=True, is_min_aggregate=True)
    return AggregateSample(minimal=0.0, remainder=prefactor * phi(og.graph()), connected=True, is_min_aggregate=False)


def singleton_overlap_probability(
    eps: float,
    w: np.ndarray,
    horizon: float,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Chance that a resting particle and one moving at `w` overlap on `[0, T]`.

    Both particles are placed uniformly and run as separate one-particle
    realizations; the overlap is read off the two cluster paths. Samples that
    overlap at time zero are discarded.

    Returns:
        The estimated probability and its binomial standard error.
    """
    w = np.asarray(w, dtype=np.float64)
    dim = w.shape[0]
    engine = NaiveEngine()
    hits, kept = 0, 0
    for _ in range(n_samples):
        paths: list[ClusterPath] = []
        for v in (np.zeros(dim), w):
            config = Configuration(positions=rng.random((1, dim)), velocities=v[None, :], eps=eps)
            record = engine.run(config, horizon)
            paths += partition_cluster_paths(InteractionGraph.from_log(record.log, 1), record.trajectories)
        og = detect_overlaps(paths, eps, (0.0, horizon))
        if og.time_zero_edges:
            continue
        kept += 1
        hits += bool(og.edges)
    p = hits / kept if kept else 0.0
    return p, math.sqrt(p * (1 - p) / kept) if kept else math.inf


@dataclass(frozen=True)
class AggregateEstimate:
    k: int
    sizes: tuple[int, ...]
    estimate: float
    stderr: float
    remainder: float
    remainder_stderr: float
    n_samples: int
    compat_rate: float
    min_aggregate_fraction: float

    @property
    def remainder_ratio(self) -> float:
        return abs(self.remainder / self.estimate) if self.estimate else float("nan")


def estimate_aggregate_term(
    k: int,
    sizes: Sequence[int],
    functional: TestFunctional | None,
    eps: float,
    horizon: float,
    model: InitialModel,
    n_samples: int,
    rng: np.random.Generator,
    mu: float | None = None,
    deflection: DeflectionMode = "uniform",
) -> AggregateEstimate:
    """Per-volume contribution of aggregates of `k` cluster paths with the given sizes."""
    sizes = tuple(int(s) for s in sizes)
    if k < 2 or len(sizes) != k:
        raise ValueError(f"Need k >= 2 sizes, got k={k} and sizes={sizes}")
    if sum(sizes) > AGGREGATE_MAX_PARTICLES:
        raise SizeLimit(f"Aggregates hold at most {AGGREGATE_MAX_PARTICLES} particles, got {sum(sizes)}")
    mu = eps ** (1 - model.dim) if mu is None else mu
    minimal, remainder = Estimator(), Estimator()
    reasons: Counter = Counter()
    n_min = n_connected = 0
    for _ in range(n_samples):
        samples = [_draw_weighted_path(s, eps, horizon, model, rng, deflection) for s in sizes]
        for s in samples:
            reasons["compatible" if s.compatible else str(s.reason)] += 1
        factors = [_path_factor(s, functional) for s in samples]
        if all(s.compatible for s in samples):
            result = evaluate_aggregate([s.path for s in samples if s.path is not None], factors, eps, horizon, mu)
        else:
            result = AggregateSample(minimal=0.0, remainder=0.0, connected=False, is_min_aggregate=False)
        n_connected += result.connected
        n_min += result.is_min_aggregate
        minimal.push(result.minimal)
        remainder.push(result.remainder)
    return AggregateEstimate(
        k=k,
        sizes=sizes,
        estimate=minimal.mean,
        stderr=minimal.stderr,
        remainder=remainder.mean,
        remainder_stderr=remainder.stderr,
        n_samples=n_samples,
        compat_rate=_compat_rate(reasons),
        min_aggregate_fraction=n_min / n_connected if n_connected else float("nan"),
    )


def _totals(ensemble: Sequence[RunRecord] | np.ndarray, functional: TestFunctional | None) -> np.ndarray:
    if isinstance(ensemble, np.ndarray):
        return ensemble.astype(np.float64)
    if functional is None:
        raise ValueError("A functional is required to evaluate run records")
    return functional_totals(ensemble, functional)


@dataclass(frozen=True)
class ExponentialMoment:
    u: Float[np.ndarray, " u"]
    values: np.ndarray
    stderr: Float[np.ndarray, " u"]


def empirical_exponential_moment(
    ensemble: Sequence[RunRecord] | np.ndarray,
    functional: TestFunctional | None,
    u_grid: Sequence[float],
    mu: float,
    mode: Literal["real", "characteristic"] = "real",
) -> ExponentialMoment:
    """`mu^-1 log E exp(u H)` per grid point, with jackknife errors.

    In `characteristic` mode the exponent is `i u H`, the weights have unit
    modulus and the returned values are complex.

    Args:
        ensemble: Run records, or precomputed run totals of H.
        functional: The functional H (ignored when totals are given).
        u_grid: Values of u.
        mu: Activity used for the rescaling.
        mode: Real Laplace transform or characteristic function.

    Returns:
        Estimates and standard errors on the grid.

    Raises:
        OverflowGuard: If any real exponent exceeds 700 in magnitude.
    """
    totals = _totals(ensemble, functional)
    m = len(totals)
    values, errors = [], []
    for u in u_grid:
        if mode == "real":
            exponent = u * totals
            if np.any(np.abs(exponent) > EXPONENT_LIMIT):
                raise OverflowGuard(f"Exponent {np.abs(exponent).max():.3g} at u={u} exceeds {EXPONENT_LIMIT}")

            def statistic(s: np.ndarray, u: float = u) -> float:
                return float(scipy.special.logsumexp(u * s) - math.log(len(s))) / mu

        else:

            def statistic(s: np.ndarray, u: float = u) -> complex:  # type: ignore[misc]
                return complex(np.log(np.mean(np.exp(1j * u * s)))) / mu

        value, err = jackknife(totals, statistic)
        values.append(value)
        errors.append(err)
    logger.debug("Exponential moment over %d runs at %d grid points", m, len(values))
    dtype = np.float64 if mode == "real" else np.complex128
    return ExponentialMoment(
        u=np.asarray(u_grid, dtype=np.float64),
        values=np.asarray(values, dtype=dtype),
        stderr=np.asarray(errors),
    )


@dataclass(frozen=True)
class CumulantEstimate:
    """Order-`n` cumulant of the run total `S`.

    `rescaled` is `kappa_n(S) / mu`, which stays of order one;
    `empirical` is `kappa_n(S) / mu^n`, the cumulant of the empirical measure.
    """

    order: int
    rescaled: float
    rescaled_stderr: float
    empirical: float
    empirical_stderr: float


def cumulant_estimates(
    ensemble: Sequence[RunRecord] | np.ndarray,
    functional: TestFunctional | None,
    mu: float,
    max_order: int = 3,
) -> list[CumulantEstimate]:
    if not 1 <= max_order <= 4:
        raise ValueError(f"`{max_order=}` must be between 1 and 4")
    totals = _totals(ensemble, functional)
    out = []
    for order in range(1, max_order + 1):
        value, err = jackknife(totals, lambda s, order=order: float(scipy.stats.kstat(s, order)))
        out.append(
            CumulantEstimate(
                order=order,
                rescaled=float(value) / mu,
                rescaled_stderr=err / mu,
                empirical=float(value) / mu**order,
                empirical_stderr=err / mu**order,
            )
        )
    return out


def empirical_covariance(
    ensemble: Sequence[RunRecord] | np.ndarray,
    first: TestFunctional | None,
    second: TestFunctional | None,
    mu: float,
) -> tuple[float, float]:
    """`mu Cov(pi(h1), pi(h2))` for the empirical measure `pi`, with jackknife error.

    Precomputed totals are passed as an `(m, 2)` array.
    """
    if isinstance(ensemble, np.ndarray):
        pairs = ensemble.astype(np.float64)
    else:
        pairs = np.stack([_totals(ensemble, first), _totals(ensemble, second)], axis=1)

    def statistic(s: np.ndarray) -> float:
        return float(np.cov(s[:, 0], s[:, 1], ddof=1)[0, 1]) / mu

    value, err = jackknife(pairs, statistic)
    return float(value), err
