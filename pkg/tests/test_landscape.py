"""Tests for θ-grids, landscape sweeps, local maxima and the basin oracle."""

import numpy as np
import numpy.testing as npt
import pytest

from smoothclimb.config import BasinConfig, SweepConfig
from smoothclimb.core.mdp import estimate_return
from smoothclimb.core.policy import k_controller
from smoothclimb.core.rng import RandomStream
from smoothclimb.landscape import (
    GLOBAL,
    LOCAL,
    BasinOracle,
    count_local_maxima,
    sweep_landscape,
    theta_grid,
)
from smoothclimb.utils.validators import ValidationError


class TestThetaGrid:
    def test_inclusive(self):
        grid = theta_grid(-10.0, 2.0, 0.25)
        assert grid.size == 49
        assert grid[0] == -10.0
        assert grid[-1] == 2.0

    @pytest.mark.parametrize("lo,hi,pitch", [(0.0, 1.0, 0.0), (1.0, 1.0, 0.1), (2.0, 1.0, 0.1)])
    def test_invalid(self, lo, hi, pitch):
        with pytest.raises(ValidationError):
            theta_grid(lo, hi, pitch)


class TestLocalMaxima:
    def test_interior(self):
        npt.assert_array_equal(count_local_maxima([0.0, 1.0, 0.0, 2.0, 0.0]), [1, 3])

    def test_endpoints(self):
        npt.assert_array_equal(count_local_maxima([3.0, 2.0, 1.0]), [0])
        npt.assert_array_equal(count_local_maxima([1.0, 2.0, 3.0]), [2])

    def test_prominence_filters_ripples(self):
        values = [0.0, 1.0, 0.9, 2.0, 0.0]
        assert len(count_local_maxima(values)) == 2
        npt.assert_array_equal(count_local_maxima(values, prominence=0.5), [3])

    def test_flat_tops_are_not_strict(self):
        npt.assert_array_equal(count_local_maxima([0.0, 1.0, 1.0, 0.0, 2.0, 0.0]), [4])
        assert count_local_maxima([3.0, 3.0, 1.0]).size == 0
        assert count_local_maxima([1.0, 1.0, 1.0]).size == 0

    def test_empty(self):
        assert count_local_maxima([]).size == 0


class TestBasinOracle:
    @pytest.fixture
    def oracle(self) -> BasinOracle:
        return BasinOracle.from_landscape(np.linspace(0.0, 4.0, 5), [0.0, 1.0, 0.0, 2.0, 0.0])

    def test_peaks(self, oracle):
        npt.assert_array_equal(oracle.peaks, [1, 3])
        assert oracle.global_peak == 3

    def test_labels(self, oracle):
        assert oracle.label(0.0) == LOCAL
        assert oracle.label(1.2) == LOCAL
        assert oracle.label(2.9) == GLOBAL
        assert oracle.label(10.0) == GLOBAL
        assert oracle.peak_of(-5.0) == 1

    def test_boundary_belongs_to_left_basin(self, oracle):
        assert oracle.label(2.0) == LOCAL

    def test_needs_a_maximum(self):
        with pytest.raises(ValidationError):
            BasinOracle.from_landscape(np.arange(3.0), [0.0, 1.0, 0.0], prominence=5.0)


def test_sweep_rows(short_hillcar, profile):
    rows = sweep_landscape(
        short_hillcar, profile.x_target, np.array([-1.0, 0.0]), [0.0, 0.5], 50, RandomStream(3)
    )
    assert [(r.sigma_prime, r.theta) for r in rows] == [
        (0.0, -1.0), (0.0, 0.0), (0.5, -1.0), (0.5, 0.0)
    ]
    assert all(r.n == 50 for r in rows)
    controller = k_controller(-1.0, profile.x_target)
    direct = estimate_return(short_hillcar, controller, 50, RandomStream(3))
    assert rows[0].return_mean == direct.mean


@pytest.mark.slow
def test_landscape_topology(hillcar, profile):
    """Deterministic landscape is multimodal; the widest σ′ leaves a single maximum."""
    sigma_primes = SweepConfig().sigma_primes
    thetas = theta_grid(-10.0, 2.0, 0.25)
    rows = sweep_landscape(hillcar, profile.x_target, thetas, sigma_primes, 1000, RandomStream(0))
    counts = []
    for sigma_prime in sigma_primes:
        curve = [r for r in rows if r.sigma_prime == sigma_prime]
        stderr = np.median([r.return_stderr for r in curve])
        values = [r.return_mean for r in curve]
        counts.append(len(count_local_maxima(values, BasinConfig().prominence_se * stderr)))
    assert counts[0] >= 2
    assert counts[-1] == 1
    assert all(b <= a for a, b in zip(counts, counts[1:]))
