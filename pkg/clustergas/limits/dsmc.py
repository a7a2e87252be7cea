"""Direct simulation Monte Carlo for the hard-sphere Boltzmann equation.

Computational particles free-stream, then collide pairwise inside cells of
side `delta`. Unordered pairs in a cell collide at rate
`kappa_d |v_rel| / (M delta^d)`; candidates are drawn against a majorant
relative speed and thinned, and the majorant doubles whenever a candidate
exceeds it, after which the step is redone.
"""

__all__ = [
    "DsmcState",
    "DsmcSnapshot",
    "DsmcResult",
    "dsmc_run",
    "dsmc_step",
    "velocity_moments",
    "velocity_moment_errors",
    "moment_names",
    "fourier_modes",
    "slab_profile",
    "free_transport_mode",
]

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from jaxtyping import Float

from clustergas.errors import MajorantBreach
from clustergas.geometry import kappa, sample_impact_vector, scatter, wrap
from clustergas.sampler import InitialModel, sample_maxwellian
from clustergas.stats import jackknife

logger = logging.getLogger(__name__)

FOURIER_MODES = (1, 2, 3)


@dataclass
class DsmcState:
    positions: Float[np.ndarray, "m d"]
    velocities: Float[np.ndarray, "m d"]
    cells_per_axis: int
    dt: float
    majorant: float
    t: float = 0.0
    collisions: int = 0
    breaches: int = 0

    @property
    def m(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def cell_size(self) -> float:
        return 1.0 / self.cells_per_axis

    @property
    def weight(self) -> float:
        """Physical mass carried by one computational particle."""
        return 1.0 / self.m

    def cell_index(self) -> np.ndarray:
        idx = np.minimum(np.floor(self.positions * self.cells_per_axis).astype(np.int64), self.cells_per_axis - 1)
        return np.ravel_multi_index(idx.T, (self.cells_per_axis,) * self.dim)

    def cell_members(self) -> list[np.ndarray]:
        """Particle indices grouped by cell, in increasing cell order."""
        cells = self.cell_index()
        order = np.argsort(cells, kind="stable")
        bounds = np.searchsorted(cells[order], np.arange(self.cells_per_axis**self.dim + 1))
        return [order[bounds[c] : bounds[c + 1]] for c in range(self.cells_per_axis**self.dim)]


def _moment_samples(velocities: Float[np.ndarray, "m d"]) -> Float[np.ndarray, "m k"]:
    speed2 = np.sum(velocities**2, axis=-1)
    return np.column_stack([np.ones(len(velocities)), velocities, 0.5 * speed2, speed2**2])


def velocity_moments(velocities: Float[np.ndarray, "m d"]) -> Float[np.ndarray, " k"]:
    """Mass, momentum components, energy and fourth moment, each per particle."""
    return _moment_samples(velocities).mean(axis=0)


def velocity_moment_errors(velocities: Float[np.ndarray, "m d"]) -> Float[np.ndarray, " k"]:
    """Jackknife standard errors of `velocity_moments`."""
    samples = _moment_samples(velocities)
    return np.array([jackknife(samples[:, c], lambda s: float(s.mean()))[1] for c in range(samples.shape[1])])


def moment_names(dim: int) -> list[str]:
    return ["mass", *(f"momentum{a}" for a in range(dim)), "energy", "fourth_moment"]


def fourier_modes(positions: Float[np.ndarray, "m d"], modes: Sequence[int] = FOURIER_MODES) -> Float[np.ndarray, " k"]:
    """Empirical `mean cos(2 pi k x_1)` for each mode `k`."""
    x1 = positions[:, 0]
    if len(x1) == 0:
        return np.zeros(len(modes))
    return np.array([np.cos(2 * np.pi * k * x1).mean() for k in modes])


def slab_profile(state: DsmcState) -> list[dict[str, float]]:
    """Density, mean velocity and energy per particle in slabs along the first axis."""
    bins = state.cells_per_axis
    slab = np.minimum(np.floor(state.positions[:, 0] * bins).astype(np.int64), bins - 1)
    rows = []
    for c in range(bins):
        members = slab == c
        count = int(members.sum())
        row: dict[str, float] = {"t": state.t, "cell": c, "density": count * bins / state.m}
        v = state.velocities[members]
        for k in range(state.dim):
            row[f"mean_v{k}"] = float(v[:, k].mean()) if count else 0.0
        row["energy"] = float(0.5 * np.sum(v**2, axis=-1).mean()) if count else 0.0
        rows.append(row)
    return rows


def free_transport_mode(amplitude: float, k: int, t: float, beta: float) -> float:
    """Exact `E cos(2 pi k x_1(t))` under free flight from the cosine profile."""
    if k != 1:
        return 0.0
    return 0.5 * amplitude * math.exp(-2.0 * math.pi**2 * k * k * t * t / beta)


def _collide_cells(state: DsmcState, rng: np.random.Generator, cross_section: float) -> int:
    dim = state.dim
    rate = cross_section * kappa(dim) * state.majorant * state.dt / (state.m * state.cell_size**dim)
    accepted = 0
    for members in state.cell_members():
        nc = len(members)
        if nc < 2:
            continue
        for _ in range(int(rng.poisson(0.5 * nc * (nc - 1) * rate))):
            a, b = rng.choice(nc, size=2, replace=False)
            i, j = int(members[a]), int(members[b])
            w = state.velocities[i] - state.velocities[j]
            speed = float(np.linalg.norm(w))
            if speed > state.majorant:
                raise MajorantBreach(speed, state.majorant)
            if rng.random() * state.majorant >= speed:
                continue
            omega = sample_impact_vector(w, rng)
            state.velocities[i], state.velocities[j] = scatter(state.velocities[i], state.velocities[j], omega)
            accepted += 1
    return accepted


def dsmc_step(state: DsmcState, rng: np.random.Generator, cross_section: float = 1.0) -> None:
    """Advances by one time step: free transport, then cell collisions."""
    state.positions = wrap(state.positions + state.dt * state.velocities)
    if cross_section > 0:
        saved = state.velocities.copy()
        while True:
            try:
                state.collisions += _collide_cells(state, rng, cross_section)
                break
            except MajorantBreach as breach:
                state.velocities = saved.copy()
                state.majorant *= 2.0
                state.breaches += 1
                logger.warning("Relative speed %.3f exceeded majorant; doubling to %.3f", breach.speed, state.majorant)
    state.t += state.dt


@dataclass(frozen=True)
class DsmcSnapshot:
    t: float
    moments: Float[np.ndarray, " k"]
    moment_errors: Float[np.ndarray, " k"]
    modes: Float[np.ndarray, " k"]
    slabs: list[dict[str, float]] = field(default_factory=list)


@dataclass(frozen=True)
class DsmcResult:
    snapshots: tuple[DsmcSnapshot, ...]
    collisions: int
    breaches: int

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def mode_series(self, k_index: int = 0) -> np.ndarray:
        return np.array([s.modes[k_index] for s in self.snapshots])

    def moment_series(self) -> np.ndarray:
        return np.stack([s.moments for s in self.snapshots])

    def moment_error_series(self) -> np.ndarray:
        return np.stack([s.moment_errors for s in self.snapshots])


def dsmc_run(
    model: InitialModel,
    m: int,
    cell_size: float,
    dt: float,
    horizon: float,
    rng: np.random.Generator,
    cross_section: float = 1.0,
    output_every: int = 1,
    majorant_factor: float = 3.0,
) -> DsmcResult:
    """Runs DSMC from `m` particles drawn i.i.d. from `f0`.

    Args:
        model: Initial density.
        m: Number of computational particles.
        cell_size: Requested cell side; rounded so cells tile the torus.
        dt: Time step.
        horizon: Final time.
        rng: Random stream.
        cross_section: Multiplier of the collision kernel; 0 gives free transport.
        output_every: Steps between snapshots.
        majorant_factor: Initial majorant as a multiple of the rms relative speed.

    Returns:
        Snapshots at t=0, every `output_every` steps, and at the horizon.
    """
    if dt <= 0 or horizon <= 0:
        raise ValueError(f"`{dt=}` and `{horizon=}` must be positive")
    cells = max(1, int(round(1.0 / cell_size)))
    positions = model.profile.sample(m, model.dim, rng)
    velocities = sample_maxwellian(model.beta, rng, dim=model.dim, size=m)
    rms_relative = math.sqrt(2.0 * model.dim / model.beta)
    state = DsmcState(
        positions=positions,
        velocities=velocities,
        cells_per_axis=cells,
        dt=dt,
        majorant=majorant_factor * rms_relative,
    )

    def snapshot() -> DsmcSnapshot:
        return DsmcSnapshot(
            t=state.t,
            moments=velocity_moments(state.velocities),
            moment_errors=velocity_moment_errors(state.velocities),
            modes=fourier_modes(state.positions),
            slabs=slab_profile(state),
        )

    snapshots = [snapshot()]
    n_steps = int(math.ceil(horizon / dt - 1e-9))
    for step in range(1, n_steps + 1):
        dsmc_step(state, rng, cross_section)
        if step % output_every == 0 or step == n_steps:
            snapshots.append(snapshot())
    logger.debug("DSMC: %d collisions, %d majorant breaches over %d steps", state.collisions, state.breaches, n_steps)
    return DsmcResult(snapshots=tuple(snapshots), collisions=state.collisions, breaches=state.breaches)
