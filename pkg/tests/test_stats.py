"""Tests for streaming estimators and error bars."""

import numpy as np
import pytest
import scipy.stats

import clustergas


class TestEstimator:
    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_cumulants_match_k_statistics(self, order: int, rng: np.random.Generator) -> None:
        x = rng.exponential(size=500)
        est = clustergas.Estimator.from_values(x)
        assert est.count == 500
        assert est.cumulant(order) == pytest.approx(scipy.stats.kstat(x, order), rel=1e-9)

    def test_merge_matches_single_stream(self, rng: np.random.Generator) -> None:
        x = rng.standard_normal(1000) * 3.0 + 1.0
        chunks = [clustergas.Estimator.from_values(c) for c in np.array_split(x, 7)]
        merged = clustergas.merge_pairwise(chunks)
        single = clustergas.Estimator.from_values(x)
        assert merged.count == single.count
        for order in (1, 2, 3, 4):
            assert merged.cumulant(order) == pytest.approx(single.cumulant(order), rel=1e-9, abs=1e-12)

    def test_merge_with_empty(self) -> None:
        est = clustergas.Estimator.from_values([1.0, 2.0, 4.0])
        assert clustergas.Estimator().merge(est) == est
        assert est.merge(clustergas.Estimator()) == est
        assert clustergas.merge_pairwise([]).count == 0

    def test_stderr(self) -> None:
        est = clustergas.Estimator.from_values([1.0, 3.0])
        assert est.variance == pytest.approx(2.0)
        assert est.stderr == pytest.approx(1.0)
        assert clustergas.Estimator.from_values([1.0]).stderr == float("inf")

    def test_bad_order(self) -> None:
        with pytest.raises(ValueError):
            clustergas.Estimator.from_values([1.0, 2.0]).cumulant(5)


class TestJackknife:
    def test_mean_matches_standard_error(self, rng: np.random.Generator) -> None:
        x = rng.standard_normal(200)
        full, se = clustergas.jackknife(x, np.mean, n_blocks=None)
        assert full == pytest.approx(x.mean())
        assert se == pytest.approx(x.std(ddof=1) / np.sqrt(len(x)), rel=1e-9)

    def test_ratio_estimator(self, rng: np.random.Generator) -> None:
        values = np.stack([rng.normal(2.0, 0.1, 400), rng.normal(4.0, 0.1, 400)], axis=1)
        full, se = clustergas.jackknife(values, lambda v: v[:, 0].mean() / v[:, 1].mean())
        assert full == pytest.approx(0.5, abs=0.01)
        assert 0.0 < se < 0.01

    def test_complex_statistic(self, rng: np.random.Generator) -> None:
        phases = rng.uniform(0, 2 * np.pi, 1000)
        full, se = clustergas.jackknife(phases, lambda p: np.exp(1j * p).mean())
        assert abs(full) < 5 * se

    def test_single_sample(self) -> None:
        _, se = clustergas.jackknife(np.array([1.0]), np.mean)
        assert se == float("inf")


class TestDecayExponent:
    def test_exact_power_law(self) -> None:
        mu = np.array([10.0, 100.0, 1000.0, 10000.0])
        fit = clustergas.decay_exponent(mu, 3.0 / mu)
        assert fit.slope == pytest.approx(-1.0)
        assert fit.intercept == pytest.approx(np.log(3.0))
        assert fit.within(-1.2, -0.8)

    def test_weighted_fit(self, rng: np.random.Generator) -> None:
        mu = np.geomspace(10, 1e4, 6)
        values = -(mu**-2.0) * np.exp(rng.normal(0, 0.01, len(mu)))
        fit = clustergas.decay_exponent(mu, values, errors=0.01 * np.abs(values))
        assert fit.slope == pytest.approx(-2.0, abs=0.05)
        assert fit.ci_low < fit.slope < fit.ci_high

    def test_rejects_bad_input(self) -> None:
        with pytest.raises(ValueError):
            clustergas.decay_exponent([1.0, 2.0, 3.0], [1.0, 0.0, 1.0])
        with pytest.raises(ValueError):
            clustergas.decay_exponent([1.0, 2.0], [1.0, 0.5])
