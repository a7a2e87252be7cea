"""Mergeable accumulators and resampling error estimates."""

__all__ = [
    "Estimator",
    "merge_pairwise",
    "jackknife",
    "DecayFit",
    "decay_exponent",
]

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.stats
from jaxtyping import Float

logger = logging.getLogger(__name__)


@dataclass
class Estimator:
    """Streaming count, mean and central moments up to order four.

    Merging uses the pairwise update formulas for central moments, so
    combining partial accumulators reproduces single-stream accumulation up
    to rounding.
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    def push(self, x: float) -> None:
        merged = self.merge(Estimator(count=1, mean=float(x)))
        self.count, self.mean, self.m2, self.m3, self.m4 = merged.count, merged.mean, merged.m2, merged.m3, merged.m4

    def extend(self, xs: Sequence[float] | np.ndarray) -> None:
        for x in np.asarray(xs, dtype=np.float64).ravel():
            self.push(float(x))

    @classmethod
    def from_values(cls, xs: Sequence[float] | np.ndarray) -> "Estimator":
        est = cls()
        est.extend(xs)
        return est

    def merge(self, other: "Estimator") -> "Estimator":
        na, nb = self.count, other.count
        if na == 0:
            return Estimator(other.count, other.mean, other.m2, other.m3, other.m4)
        if nb == 0:
            return Estimator(self.count, self.mean, self.m2, self.m3, self.m4)
        n = na + nb
        delta = other.mean - self.mean
        d_n = delta / n
        mean = self.mean + nb * d_n
        m2 = self.m2 + other.m2 + delta * d_n * na * nb
        m3 = (
            self.m3
            + other.m3
            + delta * d_n * d_n * na * nb * (na - nb)
            + 3.0 * d_n * (na * other.m2 - nb * self.m2)
        )
        m4 = (
            self.m4
            + other.m4
            + delta * d_n**3 * na * nb * (na * na - na * nb + nb * nb)
            + 6.0 * d_n * d_n * (na * na * other.m2 + nb * nb * self.m2)
            + 4.0 * d_n * (na * other.m3 - nb * self.m3)
        )
        return Estimator(count=n, mean=mean, m2=m2, m3=m3, m4=m4)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def stderr(self) -> float:
        return float(np.sqrt(self.variance / self.count)) if self.count > 1 else float("inf")

    def cumulant(self, order: int) -> float:
        """Unbiased k-statistic of the given order (1 to 4)."""
        n = self.count
        match order:
            case 1:
                return self.mean
            case 2:
                return self.variance
            case 3:
                return n * n * (self.m3 / n) / ((n - 1) * (n - 2)) if n > 2 else 0.0
            case 4:
                if n <= 3:
                    return 0.0
                mu2, mu4 = self.m2 / n, self.m4 / n
                return n * n * ((n + 1) * mu4 - 3 * (n - 1) * mu2 * mu2) / ((n - 1) * (n - 2) * (n - 3))
            case _:
                raise ValueError(f"Cumulants are tracked up to order 4, got {order}")


def merge_pairwise(estimators: Sequence[Estimator]) -> Estimator:
    """Reduces accumulators with a fixed balanced-tree order."""
    level = list(estimators)
    if not level:
        return Estimator()
    while len(level) > 1:
        nxt = [level[k].merge(level[k + 1]) for k in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def jackknife(
    values: Float[np.ndarray, "m ..."],
    statistic: Callable[[np.ndarray], complex | float],
    n_blocks: int | None = 50,
) -> tuple[complex | float, float]:
    """Blocked delete-one jackknife.

    Args:
        values: Samples along the first axis.
        statistic: Maps a sample array to a scalar.
        n_blocks: Number of contiguous blocks; None means one sample per block.

    Returns:
        The full-sample statistic and its jackknife standard error.
    """
    values = np.asarray(values)
    m = values.shape[0]
    full = statistic(values)
    blocks = m if n_blocks is None else min(n_blocks, m)
    if blocks < 2:
        return full, float("inf")
    edges = np.linspace(0, m, blocks + 1).astype(int)
    loo = []
    for b in range(blocks):
        keep = np.concatenate([values[: edges[b]], values[edges[b + 1] :]])
        loo.append(statistic(keep))
    loo_arr = np.asarray(loo)
    spread = np.abs(loo_arr - loo_arr.mean()) ** 2
    return full, float(np.sqrt((blocks - 1) / blocks * spread.sum()))


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float

    def within(self, low: float, high: float) -> bool:
        return low <= self.slope <= high


def decay_exponent(
    mu_values: Sequence[float],
    values: Sequence[float],
    errors: Sequence[float] | None = None,
    confidence: float = 0.95,
) -> DecayFit:
    """Fits `log|value| = slope * log(mu) + intercept`.

    With `errors` the fit is weighted by the propagated log-scale errors;
    otherwise it is an ordinary least-squares regression.
    """
    x = np.log(np.asarray(mu_values, dtype=np.float64))
    y_raw = np.asarray(values, dtype=np.float64)
    if np.any(y_raw == 0):
        raise ValueError("Cannot fit a power law through zero values")
    y = np.log(np.abs(y_raw))
    dof = len(x) - 2
    if dof < 1:
        raise ValueError(f"Need at least three points for a fit with an interval, got {len(x)}")
    if errors is None:
        fit = scipy.stats.linregress(x, y)
        slope, intercept, stderr = float(fit.slope), float(fit.intercept), float(fit.stderr)
    else:
        sigma = np.asarray(errors, dtype=np.float64) / np.abs(y_raw)
        w = 1.0 / np.maximum(sigma, 1e-300) ** 2
        design = np.stack([x, np.ones_like(x)], axis=1)
        cov = np.linalg.inv(design.T @ (w[:, None] * design))
        slope, intercept = cov @ (design.T @ (w * y))
        stderr = float(np.sqrt(cov[0, 0]))
    half = float(scipy.stats.t.ppf(0.5 + confidence / 2, dof)) * stderr
    return DecayFit(
        slope=float(slope),
        intercept=float(intercept),
        stderr=stderr,
        ci_low=float(slope - half),
        ci_high=float(slope + half),
    )
