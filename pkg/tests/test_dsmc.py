"""Tests for the DSMC solver."""

import chex
import numpy as np
import pytest

import clustergas


@pytest.fixture
def cosine_model() -> clustergas.InitialModel:
    return clustergas.InitialModel(dim=2, beta=1.0, profile=clustergas.CosineProfile(amplitude=0.5))


def test_free_transport_closed_form() -> None:
    exact = clustergas.free_transport_mode(0.5, 1, 0.2, 1.0)
    assert exact == pytest.approx(clustergas.free_transport_mode_quadrature(0.5, 1, 0.2, 1.0), rel=1e-6)
    assert clustergas.free_transport_mode(0.5, 2, 0.2, 1.0) == 0.0


def test_free_transport(cosine_model: clustergas.InitialModel, rng: np.random.Generator) -> None:
    """With the collision kernel switched off the first mode decays like a Gaussian in t."""
    result = clustergas.dsmc_run(cosine_model, 20_000, 0.25, 0.05, 0.3, rng, cross_section=0.0)
    assert result.collisions == 0
    modes = result.mode_series()
    expected = [clustergas.free_transport_mode(0.5, 1, t, 1.0) for t in result.times()]
    chex.assert_trees_all_close(modes, np.array(expected), atol=0.03)


def test_conservation(cosine_model: clustergas.InitialModel, rng: np.random.Generator) -> None:
    result = clustergas.dsmc_run(cosine_model, 2000, 0.25, 0.01, 0.1, rng)
    assert result.collisions > 0
    moments = result.moment_series()
    chex.assert_trees_all_close(moments[-1, :4], moments[0, :4], atol=1e-10)


def test_collision_rate(model: clustergas.InitialModel, rng: np.random.Generator) -> None:
    m, horizon = 2000, 0.1
    result = clustergas.dsmc_run(model, m, 0.25, 0.01, horizon, rng)
    expected = clustergas.expected_merge_rate(m, model) * horizon
    assert result.collisions == pytest.approx(expected, abs=5 * np.sqrt(expected) + 0.02 * expected)


def test_majorant_breach_recovers(model: clustergas.InitialModel, rng: np.random.Generator) -> None:
    result = clustergas.dsmc_run(model, 1000, 0.25, 0.01, 0.05, rng, majorant_factor=0.05)
    assert result.breaches > 0
    moments = result.moment_series()
    chex.assert_trees_all_close(moments[-1, :4], moments[0, :4], atol=1e-10)


def test_snapshots(model: clustergas.InitialModel, rng: np.random.Generator) -> None:
    result = clustergas.dsmc_run(model, 500, 0.25, 0.01, 0.1, rng, output_every=5)
    chex.assert_trees_all_close(result.times(), np.array([0.0, 0.05, 0.1]), atol=1e-12)
    slabs = result.snapshots[-1].slabs
    assert len(slabs) == 4
    assert np.mean([row["density"] for row in slabs]) == pytest.approx(1.0)


def test_rejects_bad_step(model: clustergas.InitialModel, rng: np.random.Generator) -> None:
    with pytest.raises(ValueError):
        clustergas.dsmc_run(model, 10, 0.25, 0.0, 0.1, rng)


def test_empty_positions_have_zero_modes() -> None:
    chex.assert_trees_all_close(clustergas.fourier_modes(np.zeros((0, 2))), np.zeros(3))


def test_moment_errors(model: clustergas.InitialModel, rng: np.random.Generator) -> None:
    velocities = clustergas.sample_maxwellian(model.beta, rng, dim=2, size=2000)
    errors = clustergas.velocity_moment_errors(velocities)
    assert clustergas.moment_names(2) == ["mass", "momentum0", "momentum1", "energy", "fourth_moment"]
    assert errors.shape == (5,)
    assert errors[0] == 0.0
    fourth = np.sum(velocities**2, axis=-1) ** 2
    assert errors[-1] == pytest.approx(fourth.std() / np.sqrt(len(fourth)), rel=0.5)


@pytest.mark.slow
def test_equilibrium_is_stationary(small_config: clustergas.RunConfig, rng: np.random.Generator) -> None:
    """A uniform Maxwellian keeps every velocity moment within three standard errors over unit time."""
    rows = clustergas.dsmc_equilibrium_rows(small_config, rng, horizon=1.0)
    assert [r.metric for r in rows] == [f"dsmc_equilibrium_{name}" for name in clustergas.moment_names(2)]
    assert all(r.passed for r in rows), rows
    assert all(abs(r.value) < 1e-10 for r in rows[:-1])
    assert rows[-1].stderr > 0.0
