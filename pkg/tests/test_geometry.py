"""Tests for torus geometry, contact prediction and scattering."""

import math

import chex
import numpy as np
import pytest

import clustergas

_TOL = 1e-12


def point(x: list[float], v: list[float]) -> clustergas.PhasePoint:
    return clustergas.PhasePoint(x=np.array(x), v=np.array(v))


class TestTorus:
    def test_wrap_maps_into_unit_box(self) -> None:
        x = np.array([-0.25, 1.0, 2.75, -1e-18])
        y = clustergas.wrap(x)
        assert np.all(y >= 0.0) and np.all(y < 1.0)
        chex.assert_trees_all_close(y[:3], np.array([0.75, 0.0, 0.75]), atol=_TOL)

    def test_minimal_image(self) -> None:
        d = clustergas.torus_displacement(np.array([0.95, 0.5]), np.array([0.05, 0.5]))
        chex.assert_trees_all_close(d, np.array([0.1, 0.0]), atol=_TOL)
        assert clustergas.torus_distance(np.array([0.0, 0.0]), np.array([0.5, 0.0])) == pytest.approx(0.5)

    def test_free_flight_wraps(self) -> None:
        z = clustergas.free_flight(point([0.9, 0.1], [1.0, -1.0]), 0.2)
        chex.assert_trees_all_close(z.x, np.array([0.1, 0.9]), atol=1e-12)
        with pytest.raises(ValueError):
            clustergas.free_flight(z, -1.0)


class TestPairCollisionTime:
    def test_head_on(self) -> None:
        """Two spheres approaching head-on touch when their gap closes."""
        eps = 0.1
        z_i = point([0.3, 0.5], [1.0, 0.0])
        z_j = point([0.7, 0.5], [-1.0, 0.0])
        event = clustergas.pair_collision_time(z_i, z_j, eps, 1.0)
        assert event is not None
        assert event.t == pytest.approx((0.4 - eps) / 2.0, abs=1e-12)
        # omega = (x_i - x_j) / eps points from j to i at contact.
        chex.assert_trees_all_close(event.omega, np.array([-1.0, 0.0]), atol=1e-12)

    def test_receding_pair(self) -> None:
        z_i = point([0.3, 0.5], [-1.0, 0.0])
        z_j = point([0.5, 0.5], [1.0, 0.0])
        assert clustergas.pair_collision_time(z_i, z_j, 0.05, 0.05) is None

    def test_across_boundary(self) -> None:
        z_i = point([0.95, 0.5], [1.0, 0.0])
        z_j = point([0.15, 0.5], [0.0, 0.0])
        event = clustergas.pair_collision_time(z_i, z_j, 0.1, 1.0)
        assert event is not None
        assert event.t == pytest.approx(0.1, abs=1e-12)

    def test_beyond_horizon(self) -> None:
        z_i = point([0.1, 0.5], [0.1, 0.0])
        z_j = point([0.6, 0.5], [0.0, 0.0])
        assert clustergas.pair_collision_time(z_i, z_j, 0.1, 1.0) is None

    def test_long_horizon_scans_images(self) -> None:
        """A pair that only meets after wrapping around is still found."""
        z_i = point([0.1, 0.5], [1.0, 0.0])
        z_j = point([0.05, 0.5], [0.0, 0.0])
        event = clustergas.pair_collision_time(z_i, z_j, 0.02, 2.0)
        assert event is not None
        assert event.t == pytest.approx(1.0 - 0.05 - 0.02, abs=1e-12)

    def test_overlap_is_corrupt(self) -> None:
        z_i = point([0.5, 0.5], [1.0, 0.0])
        z_j = point([0.52, 0.5], [0.0, 0.0])
        with pytest.raises(clustergas.CorruptState):
            clustergas.pair_collision_time(z_i, z_j, 0.1, 1.0)

    def test_parallel_motion(self) -> None:
        z_i = point([0.5, 0.5], [1.0, 0.0])
        z_j = point([0.6, 0.6], [1.0, 0.0])
        assert clustergas.pair_collision_time(z_i, z_j, 0.1, 1.0) is None

    def test_exact_tangency_is_no_collision(self) -> None:
        z_i = point([0.25, 0.5], [1.0, 0.0])
        z_j = point([0.5, 0.75], [0.0, 0.0])
        assert clustergas.pair_collision_time(z_i, z_j, 0.25, 1.0) is None


class TestScatter:
    def test_conservation_and_involution(self, rng: np.random.Generator) -> None:
        for _ in range(100):
            v_i, v_j = rng.standard_normal(3), rng.standard_normal(3)
            omega = clustergas.sample_unit_vector(3, rng)
            p_i, p_j = clustergas.scatter(v_i, v_j, omega)
            chex.assert_trees_all_close(p_i + p_j, v_i + v_j, atol=1e-12)
            assert p_i @ p_i + p_j @ p_j == pytest.approx(v_i @ v_i + v_j @ v_j, abs=1e-12)
            b_i, b_j = clustergas.scatter(p_i, p_j, omega)
            chex.assert_trees_all_close((b_i, b_j), (v_i, v_j), atol=1e-12)

    def test_incoming_becomes_outgoing(self) -> None:
        omega = np.array([1.0, 0.0])
        v_i, v_j = np.array([-1.0, 0.0]), np.array([1.0, 0.0])
        assert clustergas.approach_speed(v_i - v_j, omega) == pytest.approx(2.0)
        p_i, p_j = clustergas.scatter(v_i, v_j, omega)
        assert clustergas.approach_speed(p_i - p_j, omega) == 0.0


class TestConstants:
    @pytest.mark.parametrize("dim, expected", [(2, 2.0), (3, math.pi)])
    def test_kappa(self, dim: int, expected: float) -> None:
        assert clustergas.kappa(dim) == pytest.approx(expected, rel=1e-12)
        assert clustergas.kappa_quadrature(dim) == pytest.approx(expected, rel=1e-8)

    def test_sphere_area(self) -> None:
        assert clustergas.sphere_area(2) == pytest.approx(2 * math.pi)
        assert clustergas.sphere_area(3) == pytest.approx(4 * math.pi)
        assert clustergas.ball_volume(2) == pytest.approx(math.pi)

    @pytest.mark.parametrize("dim", [2, 3])
    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
    def test_mean_relative_speed(self, dim: int, beta: float) -> None:
        exact = clustergas.mean_relative_speed(beta, dim)
        assert exact == pytest.approx(clustergas.mean_relative_speed_quadrature(beta, dim), rel=1e-8)
        if dim == 2:
            assert exact == pytest.approx(math.sqrt(math.pi / beta), rel=1e-12)


class TestSampling:
    def test_unit_vectors(self, rng: np.random.Generator) -> None:
        samples = np.stack([clustergas.sample_unit_vector(3, rng) for _ in range(4000)])
        chex.assert_trees_all_close(np.linalg.norm(samples, axis=1), np.ones(4000), atol=1e-12)
        assert np.all(np.abs(samples.mean(axis=0)) < 0.05)

    @pytest.mark.parametrize("dim", [2, 3])
    def test_impact_vectors_face_the_approach(self, dim: int, rng: np.random.Generator) -> None:
        w = rng.standard_normal(dim)
        samples = np.stack([clustergas.sample_impact_vector(w, rng) for _ in range(4000)])
        assert np.all(samples @ w <= 1e-12)
        # E[cos] of the cosine-weighted hemisphere law.
        cos = -(samples @ w) / np.linalg.norm(w)
        expected = math.pi / 4 if dim == 2 else 2.0 / 3.0
        assert cos.mean() == pytest.approx(expected, abs=0.02)
