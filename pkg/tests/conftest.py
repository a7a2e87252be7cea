"""Defines PyTest configuration for the project."""

import random

import jax
import numpy as np
import pytest
from _pytest.python import Function

import clustergas


@pytest.fixture(autouse=True)
def set_random_seed() -> None:
    random.seed(1337)
    np.random.seed(1337)


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a numpy random stream."""
    return np.random.default_rng(1337)


@pytest.fixture
def key() -> jax.Array:
    """Return a random number generator key."""
    return jax.random.PRNGKey(0)


@pytest.fixture
def model() -> clustergas.InitialModel:
    """Uniform two-dimensional gas at unit inverse temperature."""
    return clustergas.InitialModel(dim=2, beta=1.0)


@pytest.fixture
def small_config(tmp_path_factory: pytest.TempPathFactory) -> clustergas.RunConfig:
    """A configuration small enough to simulate in a unit test."""
    out = tmp_path_factory.mktemp("out")
    return clustergas.load_config(
        overrides=[
            "epsilon=0.05",
            "horizon=0.2",
            "n_runs=4",
            "compare_times=[0.1,0.2]",
            "engine.sampler_mode=sequential",
            "dsmc.m=2000",
            "coagulation.m=2000",
            f"output.out={out}",
            "output.timestamp=false",
        ]
    )


def pytest_collection_modifyitems(items: list[Function]) -> None:
    items.sort(key=lambda x: x.get_closest_marker("slow") is not None)
