import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caravan.discrete import (circular_runs, discrete_continuous_equiv, discrete_instance, knuth_park,
                              naive_park, write_blocks_csv)
from caravan.model import CaravanInstance
from caravan.parking import run_parking
from caravan.samplers import CaravanLaw, derive_seed


def test_two_caravans_wrap_into_one_block():
    traj = knuth_park(5, [(2, 0), (2, 3)])
    assert traj.occupied(2).tolist() == [0, 1, 3, 4]
    # spots 4 and 0 are neighbours on the cycle
    assert traj.partitions[2] == (4,)


def test_second_caravan_skips_occupied():
    traj = knuth_park(5, [(2, 0), (2, 1)])
    assert traj.partitions[-1] == (4,)
    assert traj.occupied(2).tolist() == [0, 1, 2, 3]


def test_single_cars():
    traj = knuth_park(4, [(1, 2), (1, 2), (1, 3), (1, 0)])
    assert traj.partitions[3] == (3,)
    assert traj.occupied(3).tolist() == [0, 2, 3]
    assert traj.partitions[4] == (4,)


def test_capacity():
    with pytest.raises(ValueError, match="capacity exceeded"):
        knuth_park(3, [(2, 0), (2, 1)])


def test_hand_example_in_continuous_model():
    traj = run_parking(CaravanInstance([0.4, 0.4], [0.0, 0.2]))
    assert traj.partitions[-1] == pytest.approx([0.8])
    r = discrete_continuous_equiv(5, CaravanLaw("deterministic"), 0, caravans=[(2, 0), (2, 1)])
    assert r.passed and r.max_discrepancy == 0.0


def test_circular_runs():
    assert circular_runs(np.array([True, False, True, True])) == (3,)
    assert circular_runs(np.array([False] * 3)) == ()
    assert circular_runs(np.array([True, False, True, False])) == (1, 1)


@given(st.integers(1, 60), st.data())
@settings(max_examples=200, deadline=None)
def test_union_find_matches_scan(n, data):
    sizes = []
    left = n
    while left > 0 and data.draw(st.booleans()):
        k = data.draw(st.integers(1, left))
        sizes.append(k)
        left -= k
    caravans = [(k, data.draw(st.integers(0, n - 1))) for k in sizes]
    fast, slow = knuth_park(n, caravans), naive_park(n, caravans)
    assert fast.partitions == slow.partitions
    assert np.array_equal(fast.owner, slow.owner)
    for i in range(len(caravans) + 1):
        assert len(fast.occupied(i)) == sum(k for k, _ in caravans[:i])


@pytest.mark.parametrize("n", [10, 100, 1000])
@pytest.mark.parametrize("law", ["deterministic:1", "geometric:0.3"])
def test_embedding(n, law):
    for seed in range(10):
        r = discrete_continuous_equiv(n, CaravanLaw.parse(law), derive_seed(2, n, seed))
        assert r.passed, (n, law, seed, r.max_discrepancy)


def test_deterministic_instance_has_n_steps():
    inst = discrete_instance(10, CaravanLaw("deterministic"), 3)
    assert len(inst) == 10 and all(k == 1 for k, _ in inst)
    with pytest.raises(ValueError):
        discrete_instance(10, CaravanLaw("exponential"), 3)


def test_blocks_csv():
    buf = io.StringIO()
    write_blocks_csv(knuth_park(5, [(2, 0), (2, 3)]), buf)
    assert buf.getvalue().splitlines() == ["step,block_rank,block_size", "1,1,2", "2,1,4"]
