"""Defines the run configuration and its loading, validation and hashing."""

__all__ = [
    "EngineConfig",
    "ExpansionConfig",
    "DsmcConfig",
    "CoagulationConfig",
    "OutputConfig",
    "RunConfig",
    "WORKERS_ENV",
    "default_workers",
    "load_config",
    "config_to_yaml",
    "config_hash",
    "validate_config",
    "resolved_mu",
    "initial_model",
]

import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence, cast

import xax
from omegaconf import DictConfig, OmegaConf
from omegaconf.errors import OmegaConfBaseException

from clustergas.errors import ConfigError
from clustergas.sampler import InitialModel, boltzmann_grad_activity, parse_profile

logger = logging.getLogger(__name__)

WORKERS_ENV = "CLUSTER_GAS_WORKERS"

ENGINE_TYPES = ("event", "naive")
SAMPLER_MODES = ("exact", "sequential")
EXPANSION_JOBS = ("nu", "aggregate", "lambda", "cumulants")
DEFLECTION_MODES = ("uniform", "proportional")
OUTPUT_FORMATS = ("csv", "jsonl")


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value is None:
        return 1
    try:
        workers = int(value)
    except ValueError:
        raise ConfigError("workers", f"{WORKERS_ENV}={value!r} is not an integer") from None
    return workers


@dataclass
class EngineConfig:
    type: str = xax.field(
        value="event",
        help="Dynamics engine: `event` (cell-list event queue) or `naive` (all-pairs oracle).",
    )
    sampler_mode: str = xax.field(
        value="exact",
        help="Initial-configuration sampler: `exact` rejection or biased `sequential` insertion.",
    )
    max_collisions_per_particle: int = xax.field(
        value=1000,
        help="Event budget per particle before a run aborts.",
    )
    retry_cap: int = xax.field(
        value=10_000,
        help="Per-particle insertion retries in sequential mode.",
    )
    max_attempts: int = xax.field(
        value=1_000_000,
        help="Whole-configuration rejections allowed in exact mode.",
    )
    check_invariants: bool = xax.field(
        value=True,
        help="If true, check conservation, hard-core and partition invariants on every run.",
    )
    sweep: list[float] = field(default_factory=list)


@dataclass
class ExpansionConfig:
    job: str = xax.field(
        value="nu",
        help="Estimator job: `nu`, `aggregate`, `lambda` or `cumulants`.",
    )
    n: int = xax.field(
        value=2,
        help="Number of particles in the cluster for the `nu` job.",
    )
    sizes: list[int] = field(default_factory=lambda: [1, 1])
    n_samples: int = xax.field(
        value=10_000,
        help="Monte Carlo samples per estimate.",
    )
    functional: str = xax.field(
        value="constant",
        help="Test functional name.",
    )
    functional_args: dict[str, Any] = field(default_factory=dict)
    deflection: str = xax.field(
        value="uniform",
        help="Deflection sampling: `uniform` on the sphere or `proportional` to the approach speed.",
    )
    u_grid: list[float] = field(default_factory=lambda: [-0.5, -0.25, 0.25, 0.5])
    characteristic: bool = xax.field(
        value=False,
        help="If true, `lambda` treats `u_grid` as imaginary parts of a characteristic function.",
    )
    max_order: int = xax.field(
        value=3,
        help="Highest cumulant order reported by the `cumulants` job.",
    )


@dataclass
class DsmcConfig:
    m: int = xax.field(
        value=100_000,
        help="Number of computational particles.",
    )
    cell_size: float = xax.field(
        value=0.05,
        help="Collision cell side.",
    )
    dt: float = xax.field(
        value=0.01,
        help="Time step.",
    )
    cross_section: float = xax.field(
        value=1.0,
        help="Collision kernel multiplier; 0 gives free transport.",
    )
    output_every: int = xax.field(
        value=1,
        help="Steps between output snapshots.",
    )
    majorant_factor: float = xax.field(
        value=3.0,
        help="Initial majorant speed in units of the rms relative speed.",
    )


@dataclass
class CoagulationConfig:
    m: int = xax.field(
        value=100_000,
        help="Number of particles in the cluster population.",
    )
    cell_size: float = xax.field(
        value=0.05,
        help="Mollification cell side.",
    )
    dt: float = xax.field(
        value=0.01,
        help="Step for cell assignment and candidate generation.",
    )
    merge_kernel: float = xax.field(
        value=1.0,
        help="Merge rate multiplier; 0 disables merging.",
    )
    output_every: int = xax.field(
        value=1,
        help="Steps between output snapshots.",
    )
    majorant_factor: float = xax.field(
        value=3.0,
        help="Initial majorant speed in units of the rms relative speed.",
    )
    rate_window: float = xax.field(
        value=0.02,
        help="Initial window over which the merge event rate is measured.",
    )


@dataclass
class OutputConfig:
    format: str = xax.field(
        value="csv",
        help="Record format: `csv` or `jsonl`.",
    )
    out: str = xax.field(
        value="out",
        help="Output directory.",
    )
    timestamp: bool = xax.field(
        value=True,
        help="If true, write the wall-clock time into output headers.",
    )
    plots: bool = xax.field(
        value=False,
        help="If true, save figures next to the tables.",
    )
    dump_trajectories: bool = xax.field(
        value=False,
        help="If true, write every particle breakpoint of every MD run.",
    )


@dataclass
class RunConfig:
    dim: int = xax.field(
        value=2,
        help="Spatial dimension, 2 or 3.",
    )
    epsilon: float = xax.field(
        value=0.01,
        help="Sphere diameter.",
    )
    mu: float | None = xax.field(
        value=None,
        help="Activity; defaults to the Boltzmann-Grad value epsilon^(1 - dim).",
    )
    beta: float = xax.field(
        value=1.0,
        help="Inverse temperature of the initial Maxwellian.",
    )
    profile: str = xax.field(
        value="uniform",
        help="Spatial profile, `uniform` or `cosine(a)` with |a| < 1.",
    )
    horizon: float = xax.field(
        value=0.2,
        help="Final time T.",
    )
    n_runs: int = xax.field(
        value=1,
        help="Number of independent runs.",
    )
    seed: int = xax.field(
        value=0,
        help="Root seed; run r uses stream (seed, r).",
    )
    workers: int = xax.field(
        value=1,
        help=f"Worker processes; the CLI defaults this to ${WORKERS_ENV}.",
    )
    compare_times: list[float] = field(default_factory=lambda: [0.1, 0.2])
    compare_epsilons: list[float] = field(default_factory=list)
    engine: EngineConfig = field(default_factory=EngineConfig)
    expansion: ExpansionConfig = field(default_factory=ExpansionConfig)
    dsmc: DsmcConfig = field(default_factory=DsmcConfig)
    coagulation: CoagulationConfig = field(default_factory=CoagulationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


def _require(errors: list[ConfigError], key: str, ok: bool, message: str) -> None:
    if not ok:
        errors.append(ConfigError(key, message))


def validate_config(cfg: RunConfig) -> RunConfig:
    """Checks every field and raises the first violation, logging all of them.

    Raises:
        ConfigError: With the dotted key path of the first invalid field.
    """
    errors: list[ConfigError] = []
    _require(errors, "dim", cfg.dim in (2, 3), f"must be 2 or 3, got {cfg.dim}")
    _require(errors, "epsilon", 0.0 < cfg.epsilon < 0.5, f"must lie in (0, 0.5), got {cfg.epsilon}")
    _require(errors, "mu", cfg.mu is None or cfg.mu > 0, f"must be positive, got {cfg.mu}")
    _require(errors, "beta", cfg.beta > 0, f"must be positive, got {cfg.beta}")
    _require(errors, "horizon", cfg.horizon > 0, f"must be positive, got {cfg.horizon}")
    _require(errors, "n_runs", cfg.n_runs >= 1, f"must be at least 1, got {cfg.n_runs}")
    _require(errors, "seed", cfg.seed >= 0, f"must be non-negative, got {cfg.seed}")
    _require(errors, "workers", cfg.workers >= 1, f"must be at least 1, got {cfg.workers}")
    _require(
        errors,
        "compare_times",
        all(0 < t <= cfg.horizon for t in cfg.compare_times),
        f"times must lie in (0, {cfg.horizon}]",
    )
    _require(errors, "compare_epsilons", all(0 < e < 0.5 for e in cfg.compare_epsilons), "must lie in (0, 0.5)")
    try:
        parse_profile(cfg.profile)
    except ValueError as e:
        errors.append(ConfigError("profile", str(e)))

    engine = cfg.engine
    _require(errors, "engine.type", engine.type in ENGINE_TYPES, f"must be one of {ENGINE_TYPES}")
    _require(errors, "engine.sampler_mode", engine.sampler_mode in SAMPLER_MODES, f"must be one of {SAMPLER_MODES}")
    _require(errors, "engine.max_collisions_per_particle", engine.max_collisions_per_particle >= 1, "must be positive")
    _require(errors, "engine.retry_cap", engine.retry_cap >= 1, "must be positive")
    _require(errors, "engine.max_attempts", engine.max_attempts >= 1, "must be positive")
    _require(errors, "engine.sweep", all(t > 0 for t in engine.sweep), "horizons must be positive")

    exp = cfg.expansion
    _require(errors, "expansion.job", exp.job in EXPANSION_JOBS, f"must be one of {EXPANSION_JOBS}")
    _require(errors, "expansion.n", exp.n >= 1, f"must be positive, got {exp.n}")
    _require(errors, "expansion.sizes", len(exp.sizes) >= 1 and all(s >= 1 for s in exp.sizes), "sizes must be >= 1")
    _require(errors, "expansion.n_samples", exp.n_samples >= 2, "need at least two samples")
    _require(errors, "expansion.deflection", exp.deflection in DEFLECTION_MODES, f"must be one of {DEFLECTION_MODES}")
    _require(errors, "expansion.max_order", 1 <= exp.max_order <= 4, "must lie in 1..4")

    for block, sub in (("dsmc", cfg.dsmc), ("coagulation", cfg.coagulation)):
        _require(errors, f"{block}.m", sub.m >= 2, "need at least two particles")
        _require(errors, f"{block}.cell_size", 0 < sub.cell_size <= 1, "must lie in (0, 1]")
        _require(errors, f"{block}.dt", sub.dt > 0, "must be positive")
        _require(errors, f"{block}.output_every", sub.output_every >= 1, "must be positive")
        _require(errors, f"{block}.majorant_factor", sub.majorant_factor > 0, "must be positive")
    _require(errors, "dsmc.cross_section", cfg.dsmc.cross_section >= 0, "must be non-negative")
    _require(errors, "coagulation.merge_kernel", cfg.coagulation.merge_kernel >= 0, "must be non-negative")
    _require(errors, "coagulation.rate_window", cfg.coagulation.rate_window > 0, "must be positive")
    _require(errors, "output.format", cfg.output.format in OUTPUT_FORMATS, f"must be one of {OUTPUT_FORMATS}")

    if errors:
        for error in errors:
            logger.error("Invalid configuration %s", error)
        raise errors[0]
    return cfg


def load_config(
    path: str | Path | None = None,
    overrides: Sequence[str] = (),
    **fields: object,
) -> RunConfig:
    """Builds a validated config from defaults, a YAML/JSON file, fields and dotlist overrides.

    Args:
        path: Optional YAML file; JSON is valid YAML.
        overrides: Dotlist entries such as `dsmc.dt=0.005`.
        fields: Top-level values that sit between the file and the dotlist, as CLI flags do.

    Returns:
        The merged and validated configuration.
    """
    base = OmegaConf.structured(RunConfig)
    layers: list[DictConfig] = [base]
    try:
        if path is not None:
            loaded = OmegaConf.load(Path(path))
            if not isinstance(loaded, DictConfig):
                raise ConfigError("<root>", f"{path} does not contain a mapping")
            layers.append(loaded)
        set_fields = {k: v for k, v in fields.items() if v is not None}
        if set_fields:
            layers.append(OmegaConf.create(set_fields))
        if overrides:
            layers.append(OmegaConf.from_dotlist(list(overrides)))
        merged = OmegaConf.merge(*layers)
    except OmegaConfBaseException as e:
        key = getattr(e, "full_key", None) or "<root>"
        raise ConfigError(str(key), str(e).splitlines()[0]) from e
    cfg = cast(RunConfig, OmegaConf.to_object(merged))
    return validate_config(cfg)


def config_to_yaml(cfg: RunConfig) -> str:
    return OmegaConf.to_yaml(OmegaConf.structured(cfg), sort_keys=True)


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical YAML form."""
    return hashlib.sha256(config_to_yaml(cfg).encode("utf-8")).hexdigest()


def resolved_mu(cfg: RunConfig) -> float:
    return boltzmann_grad_activity(cfg.epsilon, cfg.dim) if cfg.mu is None else float(cfg.mu)


def initial_model(cfg: RunConfig) -> InitialModel:
    return InitialModel(dim=cfg.dim, beta=cfg.beta, profile=parse_profile(cfg.profile))
