"""Closed forms and quadratures the simulations are checked against."""

__all__ = [
    "kappa_quadrature",
    "mean_relative_speed",
    "mean_relative_speed_quadrature",
    "profile_overlap_integral",
    "two_body_nu_limit",
    "expected_merge_rate",
    "tube_volume",
    "tube_rejection_oracle",
    "free_transport_mode_quadrature",
    "phi_complete",
    "cayley_count",
]

import math

import numpy as np
import scipy.integrate
import scipy.special

from clustergas.geometry import ball_volume, kappa, sphere_area, torus_displacement
from clustergas.sampler import InitialModel, maxwellian_density


def kappa_quadrature(dim: int) -> float:
    """`int (e . omega)_+ d omega` over the unit sphere, by polar-angle quadrature."""
    if dim == 2:
        value, _ = scipy.integrate.quad(lambda th: max(math.cos(th), 0.0), 0.0, 2 * math.pi, points=[math.pi / 2])
        return value
    ring = sphere_area(dim - 1)
    value, _ = scipy.integrate.quad(lambda th: max(math.cos(th), 0.0) * math.sin(th) ** (dim - 2), 0.0, math.pi)
    return ring * value


def mean_relative_speed(beta: float, dim: int) -> float:
    """`E|v - v'|` for independent Maxwellians at inverse temperature `beta`."""
    return math.sqrt(4.0 / beta) * math.exp(scipy.special.gammaln((dim + 1) / 2) - scipy.special.gammaln(dim / 2))


def mean_relative_speed_quadrature(beta: float, dim: int) -> float:
    """Same quantity from the radial density of the relative velocity."""
    var = 2.0 / beta

    def radial(r: float, power: int) -> float:
        return r**power * math.exp(-r * r / (2 * var))

    num, _ = scipy.integrate.quad(radial, 0.0, np.inf, args=(dim,))
    den, _ = scipy.integrate.quad(radial, 0.0, np.inf, args=(dim - 1,))
    return num / den


def profile_overlap_integral(model: InitialModel) -> float:
    """`int rho(x)^2 dx`, the chance density that two independent particles meet."""

    def integrand(s: float) -> float:
        x = np.zeros(model.dim)
        x[0] = s
        return float(model.profile.density(x)) ** 2

    value, _ = scipy.integrate.quad(integrand, 0.0, 1.0, limit=200)
    return value


def two_body_nu_limit(model: InitialModel, horizon: float) -> float:
    """Limit of the per-volume size-two mass as the diameter goes to zero, with H = 0.

    Equals `T/2 * kappa_d * E|v - v'| * int rho^2`; `T sqrt(pi)` for a uniform
    two-dimensional gas at `beta = 1`.
    """
    rate = kappa(model.dim) * mean_relative_speed(model.beta, model.dim)
    return 0.5 * horizon * rate * profile_overlap_integral(model)


def expected_merge_rate(m: int, model: InitialModel) -> float:
    """Merges per unit time at t = 0 among `m` singletons drawn from `f0`."""
    rate = 0.5 * (m - 1) * kappa(model.dim) * mean_relative_speed(model.beta, model.dim)
    return rate * profile_overlap_integral(model)


def tube_volume(eps: float, speed: float, horizon: float, dim: int, include_ball: bool = False) -> float:
    """Volume swept by a sphere of radius `eps` moving `speed * horizon`."""
    volume = ball_volume(dim - 1) * eps ** (dim - 1) * speed * horizon
    if include_ball:
        volume += ball_volume(dim) * eps**dim
    return volume


def tube_rejection_oracle(
    eps: float,
    w: np.ndarray,
    horizon: float,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Probability that two uniform points with relative velocity `w` meet on `[0, T]`.

    Draws the relative position uniformly, rejects initial overlaps, and tests
    the point-to-segment distance of the minimal images.

    Returns:
        The estimated probability and its binomial standard error.
    """
    w = np.asarray(w, dtype=np.float64)
    dim = w.shape[0]
    hits, kept = 0, 0
    span = float(np.dot(w, w)) * horizon
    for _ in range(n_samples):
        r = torus_displacement(np.zeros(dim), rng.random(dim))
        if float(np.dot(r, r)) < eps * eps:
            continue
        kept += 1
        best = math.inf
        for shift in np.ndindex(*(3,) * dim):
            r_img = r + np.asarray(shift) - 1
            s = 0.0 if span == 0.0 else min(max(-float(np.dot(r_img, w)) / float(np.dot(w, w)), 0.0), horizon)
            best = min(best, float(np.linalg.norm(r_img + s * w)))
        hits += best < eps
    p = hits / kept if kept else 0.0
    return p, math.sqrt(p * (1 - p) / kept) if kept else math.inf


def free_transport_mode_quadrature(amplitude: float, k: int, t: float, beta: float) -> float:
    """`E cos(2 pi k x_1(t))` under free flight from the cosine profile, by double quadrature."""
    sigma = 1.0 / math.sqrt(beta)

    def integrand(v: float, x: float) -> float:
        rho = 1.0 + amplitude * math.cos(2 * math.pi * x)
        return rho * math.cos(2 * math.pi * k * (x + v * t)) * float(maxwellian_density(np.array([v]), beta))

    value, _ = scipy.integrate.dblquad(integrand, 0.0, 1.0, -10 * sigma, 10 * sigma)
    return value


def phi_complete(k: int) -> int:
    return (-1) ** (k - 1) * math.factorial(k - 1)


def cayley_count(k: int) -> int:
    return k ** (k - 2) if k >= 2 else 1
