"""Tests for the oracle suites behind `validate`."""

import numpy as np
import pytest

import clustergas


def test_geometry_suite(rng: np.random.Generator) -> None:
    consts, scattering = clustergas.geometry_suite(rng, n_cases=50)
    assert consts.passed and scattering.passed
    assert scattering.cases == 50


def test_engine_suite(rng: np.random.Generator) -> None:
    result = clustergas.engine_suite(rng, n_cases=10)
    assert result.cases == 10
    assert result.passed, result.first_failure


def test_failures_keep_first_detail() -> None:
    result = clustergas.SuiteResult("engine", "event_vs_naive")
    result.record(True)
    result.record(False, "case 1")
    result.record(False, "case 2")
    assert result.row() == {
        "suite": "engine",
        "check": "event_vs_naive",
        "cases": 3,
        "failures": 2,
        "passed": False,
        "first_failure": "case 1",
    }


@pytest.mark.slow
def test_default_suites(small_config: clustergas.RunConfig) -> None:
    """Without `--full` the engine runs 200 cases against the oracle and 1000 random graphs are drawn."""
    results = {(r.suite, r.check): r for r in clustergas.run_suites(small_config)}
    assert results["engine", "event_vs_naive"].cases == 200
    assert results["combinatorics", "random_graph_inequality"].cases > 400
    assert all(r.passed for r in results.values()), [r.row() for r in results.values() if not r.passed]
