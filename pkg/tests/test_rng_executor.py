"""Tests for random streams and the block executor."""

import numpy as np
import numpy.testing as npt
import pytest

from smoothclimb.core.executor import EstimationError, RolloutExecutor
from smoothclimb.core.rng import RandomStream, RolloutStreams
from smoothclimb.utils.validators import ValidationError


class TestRandomStream:
    def test_same_path_same_draws(self):
        a = RandomStream(7).child(3).child(1).generator().standard_normal(5)
        b = RandomStream(7).child(3).child(1).generator().standard_normal(5)
        npt.assert_array_equal(a, b)

    def test_children_are_distinct(self):
        a = RandomStream(7).child(0).generator().standard_normal(5)
        b = RandomStream(7).child(1).generator().standard_normal(5)
        c = RandomStream(8).child(0).generator().standard_normal(5)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_child_extends_path(self):
        assert RandomStream(1).child(2).child(5).path == (2, 5)

    def test_negative_seed_rejected(self):
        with pytest.raises(ValidationError):
            RandomStream(-1)

    def test_rollout_streams_are_independent(self):
        streams = RolloutStreams.from_stream(RandomStream(3))
        draws = [g.standard_normal(4) for g in (streams.env, streams.policy, streams.perturb)]
        assert not np.array_equal(draws[0], draws[1])
        assert not np.array_equal(draws[1], draws[2])


class TestRolloutExecutor:
    def test_block_counts(self):
        executor = RolloutExecutor(block_size=250)
        assert executor.block_counts(1001) == [250, 250, 250, 250, 1]
        assert executor.block_counts(250) == [250]

    def test_results_do_not_depend_on_threads(self):
        def block(count, block_stream):
            return block_stream.generator().standard_normal(count)

        one = RolloutExecutor(threads=1, block_size=10).map_blocks(
            block, 95, RandomStream(5), "test"
        )
        four = RolloutExecutor(threads=4, block_size=10).map_blocks(
            block, 95, RandomStream(5), "test"
        )
        npt.assert_array_equal(np.concatenate(one), np.concatenate(four))
        assert [len(b) for b in one] == [10] * 9 + [5]

    def test_numerical_failures_become_estimation_errors(self):
        def block(count, block_stream):
            raise FloatingPointError("overflow")

        with pytest.raises(EstimationError, match="overflow"):
            RolloutExecutor().map_blocks(block, 10, RandomStream(0), "failing")

    def test_invalid_construction(self):
        with pytest.raises(ValidationError):
            RolloutExecutor(threads=0)
        with pytest.raises(ValidationError):
            RolloutExecutor(block_size=0)
