"""Tests for the cluster-expansion estimators."""

import math

import chex
import numpy as np
import pytest

import clustergas


def head_on_params(omega: list[float]) -> clustergas.DecoratedTreeParams:
    return clustergas.DecoratedTreeParams(
        n=2,
        tree=clustergas.OrderedTree(n=2, edges=((0, 1),)),
        y=np.array([0.5, 0.5]),
        velocities=np.array([[1.0, 0.0], [-1.0, 0.0]]),
        times=np.array([0.05]),
        omegas=np.array([omega]),
    )


class TestReconstruction:
    def test_head_on(self) -> None:
        sample = clustergas.reconstruct_cluster_path(head_on_params([-1.0, 0.0]), eps=0.01, horizon=0.1)
        assert sample.compatible
        assert sample.reason is None
        assert sample.weight == pytest.approx(2.0)
        assert sample.config is not None and sample.path is not None
        chex.assert_trees_all_close(sample.config.positions, np.array([[0.445, 0.5], [0.555, 0.5]]), atol=1e-12)
        params = clustergas.extract_tree_parameters(sample.path, 0.01)
        chex.assert_trees_all_close(params.times, np.array([0.05]), atol=1e-12)
        chex.assert_trees_all_close(params.omegas, np.array([[-1.0, 0.0]]), atol=1e-9)

    def test_outgoing_normal(self) -> None:
        sample = clustergas.reconstruct_cluster_path(head_on_params([1.0, 0.0]), eps=0.01, horizon=0.1)
        assert not sample.compatible
        assert sample.reason == "outgoing"
        assert sample.weight == 0.0

    def test_time_beyond_horizon(self) -> None:
        with pytest.raises(ValueError):
            clustergas.reconstruct_cluster_path(head_on_params([-1.0, 0.0]), eps=0.01, horizon=0.01)

    @pytest.mark.parametrize("deflection", ["uniform", "proportional"])
    def test_sampled_params_are_valid(self, deflection: str, rng: np.random.Generator) -> None:
        for n in (1, 2, 4):
            params, density = clustergas.sample_tree_params(n, 2, 0.5, 0.5, rng, deflection)  # type: ignore[arg-type]
            assert params.n == n
            assert density >= 0.0
            assert np.all(params.times <= 0.5)


class TestNuIntegral:
    def test_single_particle_normalization(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        est = clustergas.estimate_nu_integral(1, None, 0.01, 0.1, model, 4000, rng)
        assert est.estimate == pytest.approx(1.0, abs=5 * est.stderr)
        assert est.compat_rate == 1.0

    def test_single_particle_constant(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        functional = clustergas.ConstantFunctional(value=0.5)
        est = clustergas.estimate_nu_integral(1, functional, 0.01, 0.1, model, 4000, rng)
        assert est.estimate == pytest.approx(math.exp(0.5), abs=5 * est.stderr)

    def test_two_body_limit(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        horizon = 0.1
        est = clustergas.estimate_nu_integral(2, None, 0.005, horizon, model, 3000, rng, deflection="proportional")
        limit = clustergas.two_body_nu_limit(model, horizon)
        assert limit == pytest.approx(horizon * math.sqrt(math.pi))
        assert est.estimate == pytest.approx(limit, abs=5 * est.stderr + 0.02 * limit)
        assert est.compat_rate > 0.99

    @pytest.mark.slow
    def test_two_body_gap_shrinks(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        rows = clustergas.two_body_rows(model, 0.1, [0.005, 0.02, 0.01], 3000, rng, deflection="proportional")
        assert [r.metric for r in rows] == ["two_body_gap_trend", "two_body_final_gap"]
        assert all(r.passed for r in rows), rows

    def test_size_guards(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        with pytest.raises(ValueError):
            clustergas.estimate_nu_integral(0, None, 0.01, 0.1, model, 10, rng)
        with pytest.raises(clustergas.SizeLimit):
            clustergas.estimate_nu_integral(8, None, 0.01, 0.1, model, 10, rng)


class TestAggregates:
    @pytest.mark.slow
    def test_pair_of_singletons(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        """Two singletons overlap on a tube of width 2 eps, so the term tends to -T E|v - v'|."""
        horizon = 0.2
        est = clustergas.estimate_aggregate_term(2, (1, 1), None, 0.02, horizon, model, 3000, rng)
        expected = -horizon * clustergas.mean_relative_speed(model.beta, model.dim)
        assert est.estimate == pytest.approx(expected, abs=5 * est.stderr + 0.05 * abs(expected))
        assert est.min_aggregate_fraction > 0.8
        assert est.remainder <= 0.0

    def test_resting_singletons_never_overlap(self, rng: np.random.Generator) -> None:
        p, err = clustergas.singleton_overlap_probability(0.01, np.zeros(2), 0.2, 200, rng)
        assert (p, err) == (0.0, 0.0)

    @pytest.mark.slow
    def test_singleton_overlap_matches_tube(self, rng: np.random.Generator) -> None:
        """At unit relative speed the overlap chance is 2 eps T / (1 - pi eps^2), about 0.004."""
        rows = clustergas.tube_rows(0.01, 1.0, 0.2, 5000, rng)
        assert [r.metric for r in rows] == ["singleton_overlap_vs_oracle", "singleton_overlap_vs_tube"]
        assert all(r.passed for r in rows), rows

    def test_guards(self, model: clustergas.InitialModel, rng: np.random.Generator) -> None:
        with pytest.raises(ValueError):
            clustergas.estimate_aggregate_term(2, (1,), None, 0.01, 0.1, model, 1, rng)
        with pytest.raises(clustergas.SizeLimit):
            clustergas.estimate_aggregate_term(2, (5, 4), None, 0.01, 0.1, model, 1, rng)


class TestEmpiricalMoments:
    @pytest.fixture
    def poisson_totals(self, rng: np.random.Generator) -> np.ndarray:
        return rng.poisson(50.0, size=4000).astype(np.float64)

    def test_laplace_transform(self, poisson_totals: np.ndarray) -> None:
        """For Poisson totals `mu^-1 log E exp(u S) = e^u - 1`."""
        u = [-0.1, 0.0, 0.1]
        moment = clustergas.empirical_exponential_moment(poisson_totals, None, u, mu=50.0)
        expected = np.expm1(np.array(u))
        assert np.all(np.abs(moment.values - expected) <= 5 * moment.stderr + 1e-12)
        assert moment.values[1] == pytest.approx(0.0, abs=1e-12)

    def test_characteristic_function(self, poisson_totals: np.ndarray) -> None:
        u = [0.02, 0.05]
        moment = clustergas.empirical_exponential_moment(poisson_totals, None, u, mu=50.0, mode="characteristic")
        assert moment.values.dtype == np.complex128
        expected = np.exp(1j * np.array(u)) - 1.0
        assert np.all(np.abs(moment.values - expected) <= 5 * moment.stderr)

    def test_cumulants(self, poisson_totals: np.ndarray) -> None:
        for c in clustergas.cumulant_estimates(poisson_totals, None, mu=50.0, max_order=3):
            assert c.rescaled == pytest.approx(1.0, abs=5 * c.rescaled_stderr)
            assert c.empirical == pytest.approx(c.rescaled / 50.0 ** (c.order - 1))
        with pytest.raises(ValueError):
            clustergas.cumulant_estimates(poisson_totals, None, mu=50.0, max_order=5)

    def test_covariance(self, poisson_totals: np.ndarray) -> None:
        pairs = np.stack([poisson_totals, poisson_totals], axis=1)
        value, err = clustergas.empirical_covariance(pairs, None, None, 50.0)
        assert value == pytest.approx(1.0, abs=5 * err)

    def test_overflow_guard(self) -> None:
        with pytest.raises(clustergas.OverflowGuard):
            clustergas.empirical_exponential_moment(np.full(10, 1000.0), None, [1.0], mu=1.0)

    def test_records_need_a_functional(self) -> None:
        with pytest.raises(ValueError):
            clustergas.cumulant_estimates([], None, mu=1.0)
