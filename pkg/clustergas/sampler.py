"""Samples time-zero configurations from the grand-canonical hard-core measure."""

__all__ = [
    "SpatialProfile",
    "UniformProfile",
    "CosineProfile",
    "parse_profile",
    "InitialModel",
    "SampleInfo",
    "SamplerMode",
    "GrandCanonicalSampler",
    "boltzmann_grad_activity",
    "sample_maxwellian",
    "maxwellian_density",
    "sample_initial_config",
    "evaluate_f0",
    "partition_function_ratios",
]

import functools
import logging
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Literal

import attrs
import numpy as np
import scipy.integrate
import scipy.stats
import xax
from jaxtyping import Float

from clustergas.errors import PackingFailure
from clustergas.geometry import ball_volume
from clustergas.types import Configuration, PhasePoint

logger = logging.getLogger(__name__)

SamplerMode = Literal["exact", "sequential"]

RETRY_CAP = 10_000


@attrs.define(frozen=True, kw_only=True)
class SpatialProfile(ABC):
    """Normalized spatial density on the unit torus."""

    @abstractmethod
    def density(self, x: Float[np.ndarray, "... d"]) -> Float[np.ndarray, "..."]:
        """Evaluates the profile at positions `x`."""

    @abstractmethod
    def sample(self, n: int, dim: int, rng: np.random.Generator) -> Float[np.ndarray, "n d"]:
        """Draws `n` i.i.d. positions."""

    @abstractmethod
    def sup(self) -> float:
        """Upper bound of the density."""

    def marginal_integral(self) -> float:
        """Integral of the profile along the first axis (the others are uniform)."""
        value, _ = scipy.integrate.quad(lambda s: float(self.density(np.array([s]))), 0.0, 1.0, limit=200)
        return value

    def get_name(self) -> str:
        return xax.camelcase_to_snakecase(self.__class__.__name__)

    @functools.cached_property
    def profile_name(self) -> str:
        return self.get_name()


@attrs.define(frozen=True, kw_only=True)
class UniformProfile(SpatialProfile):
    def density(self, x: Float[np.ndarray, "... d"]) -> Float[np.ndarray, "..."]:
        return np.ones(np.shape(x)[:-1])

    def sample(self, n: int, dim: int, rng: np.random.Generator) -> Float[np.ndarray, "n d"]:
        return rng.random((n, dim))

    def sup(self) -> float:
        return 1.0

    def __str__(self) -> str:
        return "uniform"


def _amplitude_validator(inst: "CosineProfile", attr: attrs.Attribute, value: float) -> None:
    if not abs(value) < 1.0:
        raise ValueError(f"Cosine amplitude must satisfy |a| < 1, got {value}")


@attrs.define(frozen=True, kw_only=True)
class CosineProfile(SpatialProfile):
    """Density `1 + a cos(2 pi x_1)`, uniform in the other coordinates."""

    amplitude: float = attrs.field(validator=_amplitude_validator)

    def density(self, x: Float[np.ndarray, "... d"]) -> Float[np.ndarray, "..."]:
        return 1.0 + self.amplitude * np.cos(2 * np.pi * np.asarray(x)[..., 0])

    def sample(self, n: int, dim: int, rng: np.random.Generator) -> Float[np.ndarray, "n d"]:
        out = rng.random((n, dim))
        bound = 1.0 + abs(self.amplitude)
        todo = np.arange(n)
        while todo.size:
            x1 = rng.random(todo.size)
            accept = rng.random(todo.size) * bound <= 1.0 + self.amplitude * np.cos(2 * np.pi * x1)
            out[todo[accept], 0] = x1[accept]
            todo = todo[~accept]
        return out

    def sup(self) -> float:
        return 1.0 + abs(self.amplitude)

    def __str__(self) -> str:
        return f"cosine({self.amplitude!r})"


_COSINE_RE = re.compile(r"^cosine\(\s*([-+0-9.eE]+)\s*\)$")


def parse_profile(spec: str) -> SpatialProfile:
    """Parses `uniform` or `cosine(a)`."""
    spec = spec.strip().lower()
    if spec == "uniform":
        return UniformProfile()
    if (match := _COSINE_RE.match(spec)) is not None:
        return CosineProfile(amplitude=float(match.group(1)))
    raise ValueError(f"Unsupported profile `{spec}`; expected `uniform` or `cosine(a)`")


@attrs.define(frozen=True, kw_only=True)
class InitialModel:
    """Single-particle density `f0(x, v) = profile(x) M_beta(v)`."""

    dim: int = attrs.field(validator=attrs.validators.in_((2, 3)))
    beta: float = attrs.field(validator=attrs.validators.gt(0.0))
    profile: SpatialProfile = attrs.field(factory=UniformProfile)
    c0: float | None = attrs.field(default=None)

    @property
    def envelope(self) -> float:
        return self.profile.sup() if self.c0 is None else self.c0

    def maxwellian(self, v: Float[np.ndarray, "... d"]) -> Float[np.ndarray, "..."]:
        return maxwellian_density(v, self.beta)

    def f0(self, x: Float[np.ndarray, "... d"], v: Float[np.ndarray, "... d"]) -> Float[np.ndarray, "..."]:
        return self.profile.density(x) * self.maxwellian(v)

    def check_envelope(self, n_grid: int = 21, v_max: float = 4.0) -> bool:
        """Checks `f0 <= C0 M_beta` on a product grid."""
        xs = np.linspace(0.0, 1.0, n_grid, endpoint=False)
        vs = np.linspace(-v_max, v_max, n_grid)
        x = np.zeros((n_grid, self.dim))
        x[:, 0] = xs
        v = np.zeros((n_grid, self.dim))
        v[:, 0] = vs
        f = self.f0(x[:, None, :], v[None, :, :])
        bound = self.envelope * self.maxwellian(v)[None, :]
        return bool(np.all(f <= bound * (1.0 + 1e-12)))

    def check_normalization(self, tol: float = 1e-6) -> bool:
        return abs(self.profile.marginal_integral() - 1.0) <= tol


def maxwellian_density(v: Float[np.ndarray, "... d"], beta: float) -> Float[np.ndarray, "..."]:
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[-1]
    return (beta / (2 * np.pi)) ** (d / 2) * np.exp(-0.5 * beta * np.sum(v**2, axis=-1))


def boltzmann_grad_activity(eps: float, dim: int) -> float:
    """Activity `eps^(1-d)` keeping the mean free path of order one."""
    return eps ** (1 - dim)


def sample_maxwellian(
    beta: float,
    rng: np.random.Generator,
    dim: int = 2,
    size: int | None = None,
) -> Float[np.ndarray, "... d"]:
    """Centered Gaussian velocities with per-component variance `1 / beta`."""
    if beta <= 0:
        raise ValueError(f"`{beta=}` must be positive")
    shape = (dim,) if size is None else (size, dim)
    return rng.standard_normal(shape) / math.sqrt(beta)


def evaluate_f0(model: InitialModel, z: PhasePoint) -> float:
    return float(model.f0(z.x, z.v))


@dataclass(frozen=True)
class SampleInfo:
    mode: SamplerMode
    attempts: int
    retries: int
    truncation_mass: float
    biased: bool


def _satisfies_hard_core(positions: np.ndarray, eps: float) -> bool:
    n = positions.shape[0]
    if n < 2:
        return True
    diff = positions[:, None, :] - positions[None, :, :]
    diff -= np.floor(diff + 0.5)
    dist2 = np.sum(diff**2, axis=-1)
    iu = np.triu_indices(n, k=1)
    return bool(np.all(dist2[iu] > eps * eps))


@attrs.define(frozen=True, kw_only=True)
class GrandCanonicalSampler:
    """Draws configurations with `N ~ Poisson(mu)` and i.i.d. points from `f0`.

    `exact` rejects whole configurations that violate the hard-core condition,
    which samples the grand-canonical measure exactly. `sequential` inserts
    particles one at a time and is biased by order `mu^2 eps^d`.
    """

    mu: float = attrs.field(validator=attrs.validators.gt(0.0))
    eps: float = attrs.field(validator=attrs.validators.gt(0.0))
    model: InitialModel
    mode: SamplerMode = attrs.field(default="exact", validator=attrs.validators.in_(("exact", "sequential")))
    retry_cap: int = attrs.field(default=RETRY_CAP)
    max_attempts: int = attrs.field(default=1_000_000)

    @functools.cached_property
    def n_max(self) -> int:
        return int(math.ceil(self.mu + 10.0 * math.sqrt(self.mu)))

    @functools.cached_property
    def truncation_mass(self) -> float:
        mass = float(scipy.stats.poisson.sf(self.n_max, self.mu))
        if mass > 0:
            logger.debug("Poisson truncation at N_max=%d drops mass %.3g", self.n_max, mass)
        return mass

    def _draw_n(self, rng: np.random.Generator) -> int:
        while True:
            n = int(rng.poisson(self.mu))
            if n <= self.n_max:
                return n

    def _draw_points(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        positions = self.model.profile.sample(n, self.model.dim, rng)
        velocities = sample_maxwellian(self.model.beta, rng, dim=self.model.dim, size=n)
        return positions, velocities

    def _sample_exact(self, rng: np.random.Generator) -> tuple[Configuration, SampleInfo]:
        for attempt in range(1, self.max_attempts + 1):
            n = self._draw_n(rng)
            positions, velocities = self._draw_points(n, rng)
            if _satisfies_hard_core(positions, self.eps):
                info = SampleInfo(
                    mode="exact",
                    attempts=attempt,
                    retries=0,
                    truncation_mass=self.truncation_mass,
                    biased=False,
                )
                return Configuration(positions=positions, velocities=velocities, eps=self.eps), info
        raise PackingFailure(
            f"Exact rejection found no hard-core configuration in {self.max_attempts} attempts "
            f"(mu={self.mu}, eps={self.eps}); use the sequential sampler"
        )

    def _sample_sequential(self, rng: np.random.Generator) -> tuple[Configuration, SampleInfo]:
        n = self._draw_n(rng)
        dim = self.model.dim
        placed = np.zeros((n, dim))
        retries = 0
        for k in range(n):
            for _ in range(self.retry_cap):
                candidate = self.model.profile.sample(1, dim, rng)[0]
                diff = placed[:k] - candidate
                diff -= np.floor(diff + 0.5)
                if k == 0 or np.min(np.sum(diff**2, axis=-1)) > self.eps * self.eps:
                    placed[k] = candidate
                    break
                retries += 1
            else:
                raise PackingFailure(f"Particle {k} of {n} could not be placed after {self.retry_cap} retries")
        velocities = sample_maxwellian(self.model.beta, rng, dim=dim, size=n)
        info = SampleInfo(
            mode="sequential",
            attempts=1,
            retries=retries,
            truncation_mass=self.truncation_mass,
            biased=True,
        )
        return Configuration(positions=placed, velocities=velocities, eps=self.eps), info

    def __call__(self, rng: np.random.Generator) -> tuple[Configuration, SampleInfo]:
        match self.mode:
            case "exact":
                return self._sample_exact(rng)
            case "sequential":
                return self._sample_sequential(rng)
            case _:
                raise ValueError(f"Unsupported sampler mode: {self.mode}")

    def expected_overlapping_pairs(self) -> float:
        """Mean number of sub-diameter pairs among `Poisson(mu)` i.i.d. points (uniform profile)."""
        return 0.5 * self.mu**2 * ball_volume(self.model.dim) * self.eps**self.model.dim


def sample_initial_config(
    mu: float,
    eps: float,
    model: InitialModel,
    mode: SamplerMode,
    rng: np.random.Generator,
) -> Configuration:
    config, _ = GrandCanonicalSampler(mu=mu, eps=eps, model=model, mode=mode)(rng)
    return config


def _ball_cosine_integral(eps: float, dim: int) -> float:
    """Integral of `cos(2 pi s_1)` over the ball of radius `eps` in R^dim."""
    slab = ball_volume(dim - 1)

    def integrand(s: float) -> float:
        return math.cos(2 * math.pi * s) * slab * (eps * eps - s * s) ** ((dim - 1) / 2)

    value, _ = scipy.integrate.quad(integrand, -eps, eps)
    return value


def partition_function_ratios(mu: float, eps: float, model: InitialModel) -> Float[np.ndarray, " 3"]:
    """Relative weights of N = 0, 1, 2 under the grand-canonical measure.

    The N = 2 weight is `mu^2 / 2` times the probability that two i.i.d.
    profile points are at least `eps` apart, computed by one-dimensional
    quadrature over the excluded ball.
    """
    if eps >= 0.5:
        raise ValueError(f"`{eps=}` must be below half the box for the ball not to wrap")
    ball = ball_volume(model.dim) * eps**model.dim
    match model.profile:
        case CosineProfile(amplitude=a):
            overlap = ball + 0.5 * a * a * _ball_cosine_integral(eps, model.dim)
        case UniformProfile():
            overlap = ball
        case _:
            raise ValueError(f"Unsupported profile: {model.profile}")
    return np.array([1.0, mu, 0.5 * mu * mu * (1.0 - overlap)])
