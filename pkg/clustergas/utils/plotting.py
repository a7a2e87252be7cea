"""Figures for cluster-size laws, crossover sweeps and mode relaxation."""

__all__ = [
    "plot_size_laws",
    "plot_crossover",
    "plot_mode_series",
]

import logging
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from clustergas.types import SizeHistogram  # noqa: E402

logger = logging.getLogger(__name__)

FIGSIZE = (6.0, 4.0)


def _save(path: str | Path) -> Path:
    path = Path(path).with_suffix(".png")
    path.parent.mkdir(parents=True, exist_ok=True)
    plt.savefig(path, format="png", dpi=120, bbox_inches="tight")
    plt.close()
    logger.debug("Saved figure %s", path)
    return path


def plot_size_laws(laws: Mapping[str, SizeHistogram], path: str | Path) -> Path:
    """Particle-weighted size distributions, one line per label."""
    plt.figure(figsize=FIGSIZE)
    for label, law in laws.items():
        frac = law.particle_fraction()
        sizes = np.flatnonzero(frac)
        plt.semilogy(sizes, frac[sizes], marker="o", label=label)
    plt.xlabel("cluster size")
    plt.ylabel("particle fraction")
    if len(laws) > 1:
        plt.legend()
    plt.title("Cluster-size law")
    return _save(path)


def plot_crossover(
    horizons: Sequence[float],
    fractions: Sequence[float],
    errors: Sequence[float],
    path: str | Path,
) -> Path:
    plt.figure(figsize=FIGSIZE)
    plt.errorbar(horizons, fractions, yerr=errors, marker="o", capsize=3)
    plt.axhline(0.5, color="gray", linestyle="--")
    plt.xlabel("T")
    plt.ylabel("largest-cluster fraction")
    plt.title("Dilute-to-giant crossover")
    return _save(path)


def plot_mode_series(series: Mapping[str, tuple[np.ndarray, np.ndarray]], path: str | Path) -> Path:
    """Fourier-mode amplitudes against time, one line per label."""
    plt.figure(figsize=FIGSIZE)
    for label, (times, values) in series.items():
        plt.plot(times, values, label=label)
    plt.xlabel("t")
    plt.ylabel("density mode")
    plt.legend()
    plt.title("Spatial mode relaxation")
    return _save(path)
