"""Torus geometry, free flight, pair collision prediction and scattering.

All functions are pure and operate on numpy arrays. Relative quantities follow
one convention throughout the package: for a pair `(i, j)` the separation is
`r = x_i - x_j` (minimal image), the relative velocity is `w = v_i - v_j`, and
the contact normal is `omega = r / eps`. An incoming contact has `w . omega < 0`.
"""

__all__ = [
    "CONTACT_RTOL",
    "GRAZING_TOL",
    "wrap",
    "torus_displacement",
    "torus_distance",
    "free_flight",
    "pair_collision_time",
    "scatter",
    "first_contact_time",
    "sphere_area",
    "ball_volume",
    "kappa",
    "sample_unit_vector",
    "sample_impact_vector",
    "approach_speed",
]

import itertools
import logging
import math

import numpy as np
import scipy.linalg
from jaxtyping import Float

from clustergas.errors import CorruptState
from clustergas.types import ContactEvent, PhasePoint, Trajectory

logger = logging.getLogger(__name__)

CONTACT_RTOL = 1e-9
GRAZING_TOL = 1e-12

Vector = Float[np.ndarray, " d"]


def wrap(x: np.ndarray) -> np.ndarray:
    """Maps coordinates into [0, 1)."""
    y = np.mod(x, 1.0)
    return np.where(y >= 1.0, 0.0, y)


def torus_displacement(a: Vector, b: Vector) -> Vector:
    """Minimal-image representative of `b - a`, each component in [-1/2, 1/2)."""
    d = np.asarray(b, dtype=np.float64) - np.asarray(a, dtype=np.float64)
    return d - np.floor(d + 0.5)


def torus_distance(a: Vector, b: Vector) -> float:
    return float(np.linalg.norm(torus_displacement(a, b)))


def free_flight(z: PhasePoint, dt: float) -> PhasePoint:
    if dt < 0:
        raise ValueError(f"`{dt=}` must be non-negative")
    if dt == 0:
        return z
    return PhasePoint(x=wrap(z.x + dt * z.v), v=z.v)


def _image_offsets(r: Vector, reach: float) -> list[Vector]:
    """Integer lattice shifts `n` with `|r + n|` possibly below `reach`."""
    if reach <= 0.5:
        return [np.zeros_like(r)]
    ranges = [range(math.ceil(-rc - reach), math.floor(-rc + reach) + 1) for rc in r]
    return [np.array(n, dtype=np.float64) for n in itertools.product(*ranges)]


def _entry_time(r: Vector, w: Vector, eps: float) -> float | None:
    """Earliest s >= 0 with |r + w s| = eps while approaching, or None."""
    b = float(np.dot(r, w))
    a = float(np.dot(w, w))
    if a == 0.0:
        return None
    c = float(np.dot(r, r)) - eps * eps
    if b >= -GRAZING_TOL * math.sqrt(a) * eps:
        if abs(c) <= 2 * CONTACT_RTOL * eps * eps and abs(b) <= GRAZING_TOL * math.sqrt(a) * eps:
            logger.debug("Exact tangency at separation %.17g treated as no collision", math.sqrt(c + eps * eps))
        return None
    disc = b * b - a * c
    if disc <= 0.0:
        return None
    if c <= 0.0:
        return 0.0
    return c / (-b + math.sqrt(disc))


def pair_collision_time(
    z_i: PhasePoint,
    z_j: PhasePoint,
    eps: float,
    horizon: float,
    pair: tuple[int, int] = (0, 1),
) -> ContactEvent | None:
    """Predicts the next hard-sphere contact of a pair within `horizon`.

    The nearest periodic image is used whenever the relative sweep
    `|v_i - v_j| * horizon + eps` stays below half a box. Longer sweeps scan
    every image the pair can reach, so the result is exact for any horizon.

    Args:
        z_i: First particle.
        z_j: Second particle.
        eps: Sphere diameter.
        horizon: Look-ahead duration.
        pair: Particle indices recorded in the returned event.

    Returns:
        The earliest incoming contact, or None.

    Raises:
        CorruptState: If the pair already interpenetrates.
    """
    r = torus_displacement(z_j.x, z_i.x)
    dist = float(np.linalg.norm(r))
    if dist < eps * (1.0 - CONTACT_RTOL):
        raise CorruptState(f"Pair {pair} at separation {dist:.17g} below diameter {eps:.17g}")
    w = z_i.v - z_j.v
    reach = float(np.linalg.norm(w)) * horizon + eps

    best: tuple[float, Vector] | None = None
    for offset in _image_offsets(r, reach):
        r_img = r + offset
        if float(np.linalg.norm(r_img)) > reach:
            continue
        s = _entry_time(r_img, w, eps)
        if s is None or s > horizon:
            continue
        if best is None or s < best[0]:
            best = (s, r_img + s * w)
    if best is None:
        return None
    t, r_contact = best
    return ContactEvent(t=t, omega=r_contact / np.linalg.norm(r_contact), pair=pair)


def scatter(v_i: Vector, v_j: Vector, omega: Vector) -> tuple[Vector, Vector]:
    """Specular reflection of a pair of equal-mass spheres."""
    k = float(np.dot(v_i - v_j, omega))
    return v_i - k * omega, v_j + k * omega


def first_contact_time(
    path_i: Trajectory,
    path_j: Trajectory,
    eps: float,
    window: tuple[float, float],
) -> ContactEvent | None:
    """Infimum time in `window` at which two recorded paths are within `eps`.

    Both paths are linear between the union of their breakpoints, so the
    squared separation is quadratic on each piece of that common grid.
    """
    t0, t1 = window
    inner = np.concatenate([path_i.times, path_j.times])
    inner = inner[(inner > t0) & (inner < t1)]
    grid = np.unique(np.concatenate([[t0], inner, [t1]]))
    pair = (path_i.particle_id, path_j.particle_id)

    for a, b in zip(grid[:-1], grid[1:]):
        a, b = float(a), float(b)
        r = torus_displacement(path_j.position_at(a), path_i.position_at(a))
        w = path_i.velocity_at(a) - path_j.velocity_at(a)
        length = b - a
        reach = float(np.linalg.norm(w)) * length + eps
        best: tuple[float, Vector] | None = None
        for offset in _image_offsets(r, reach):
            r_img = r + offset
            if float(np.dot(r_img, r_img)) <= (eps * (1.0 + GRAZING_TOL)) ** 2:
                s = 0.0
            else:
                bb = float(np.dot(r_img, w))
                aa = float(np.dot(w, w))
                if aa == 0.0 or bb >= 0.0:
                    continue
                c = float(np.dot(r_img, r_img)) - eps * eps
                disc = bb * bb - aa * c
                if disc < 0.0:
                    continue
                s = c / (-bb + math.sqrt(disc))
                if s > length:
                    continue
            if best is None or s < best[0]:
                best = (s, r_img + s * w)
        if best is not None:
            s, r_contact = best
            norm = float(np.linalg.norm(r_contact))
            omega = r_contact / norm if norm > 0 else np.eye(len(r_contact))[0]
            return ContactEvent(t=a + s, omega=omega, pair=pair)
    return None


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def kappa(d: int) -> float:
    """Integral of `(e . omega)_+` over the unit sphere (2 in 2D, pi in 3D)."""
    return ball_volume(d - 1)


def sample_unit_vector(d: int, rng: np.random.Generator) -> Vector:
    while True:
        g = rng.standard_normal(d)
        norm = float(np.linalg.norm(g))
        if norm > 0:
            return g / norm


def sample_impact_vector(w: Vector, rng: np.random.Generator) -> Vector:
    """Contact normal with density proportional to `(-w . omega)_+`.

    Draws a uniform point in the unit (d-1)-ball and lifts it onto the
    hemisphere facing `-w`, which gives the cosine-weighted law.
    """
    d = w.shape[0]
    speed = float(np.linalg.norm(w))
    if speed == 0.0:
        return sample_unit_vector(d, rng)
    e = -w / speed
    basis = scipy.linalg.null_space(e[None, :])
    u = sample_unit_vector(d - 1, rng) * rng.random() ** (1.0 / (d - 1))
    cos_theta = math.sqrt(max(0.0, 1.0 - float(np.dot(u, u))))
    omega = cos_theta * e + basis @ u
    return omega / np.linalg.norm(omega)


def approach_speed(w: Vector, omega: Vector) -> float:
    """Cross-section factor `(-(v_i - v_j) . omega)_+` of an incoming contact."""
    return max(0.0, -float(np.dot(w, omega)))
