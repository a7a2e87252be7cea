"""Tests for the test functionals."""

import math

import numpy as np
import pytest

import clustergas


@pytest.fixture
def record() -> clustergas.RunRecord:
    config = clustergas.Configuration(
        positions=np.array([[0.2, 0.5], [0.4, 0.5], [0.6, 0.5], [0.25, 0.1]]),
        velocities=np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 2.0]]),
        eps=0.1,
    )
    return clustergas.EventDrivenEngine().run(config, 0.25)


def test_names() -> None:
    assert clustergas.PositionModeFunctional().functional_name == "position_mode_functional"
    assert clustergas.ClusterSizeIndicator(size=2).get_name() == "cluster_size_indicator"


def test_factory() -> None:
    assert isinstance(clustergas.get_functional("constant", value=0.0), clustergas.ConstantFunctional)
    assert isinstance(clustergas.get_functional("position_mode", k=2), clustergas.PositionModeFunctional)
    assert clustergas.get_functional("cluster_size").kind == "cluster"
    with pytest.raises(ValueError):
        clustergas.get_functional("entropy")


def test_growth_check() -> None:
    clustergas.SpeedFunctional(scale=0.2).check_growth(1.0)
    with pytest.raises(ValueError):
        clustergas.SpeedFunctional(scale=0.3).check_growth(1.0)
    assert clustergas.ConstantFunctional(value=-2.0).c1 == 2.0


class TestTotals:
    def test_constant_counts_particles(self, record: clustergas.RunRecord) -> None:
        totals = clustergas.functional_totals([record], clustergas.ConstantFunctional())
        assert totals.tolist() == [4.0]

    def test_position_mode(self, record: clustergas.RunRecord) -> None:
        """At t = 0.25 the chain sits at x = 0.3, 0.5, 0.65 and the fourth sphere at 0.25."""
        expected = sum(math.cos(2 * math.pi * x) for x in (0.3, 0.5, 0.65, 0.25))
        total = clustergas.functional_totals([record], clustergas.PositionModeFunctional())[0]
        assert total == pytest.approx(expected, abs=1e-9)
        at_start = clustergas.PositionModeFunctional(part="sin", time=0.0)
        expected_start = sum(math.sin(2 * math.pi * x) for x in (0.2, 0.4, 0.6, 0.25))
        assert clustergas.functional_totals([record], at_start)[0] == pytest.approx(expected_start, abs=1e-9)

    def test_speed(self, record: clustergas.RunRecord) -> None:
        total = clustergas.functional_totals([record], clustergas.SpeedFunctional(scale=1.0))[0]
        assert total == pytest.approx(0.5 * 1.0 + 0.5 * 4.0)

    def test_cluster_functionals(self, record: clustergas.RunRecord) -> None:
        sizes = clustergas.functional_totals([record], clustergas.ClusterSizeFunctional())
        assert sizes.tolist() == [4.0]
        triples = clustergas.functional_totals([record], clustergas.ClusterSizeIndicator(size=3))
        singles = clustergas.functional_totals([record], clustergas.ClusterSizeIndicator(size=1))
        assert triples.tolist() == [1.0]
        assert singles.tolist() == [1.0]
