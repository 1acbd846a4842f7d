import io

import numpy as np
import pytest
from hypothesis import given, settings

from caravan.model import ArcSet, CaravanInstance, ranked
from caravan.parking import (backward_index, backward_marginal, check_profile_invariants, park_caravan,
                             park_to_step, profile, profiles, run_parking, write_trajectory_csv)

from conftest import complete_instance, instances


def test_park_into_empty_lot():
    occ, t, piece = park_caravan(ArcSet(), 0.2, 0.3)
    assert occ.starts == (0.2,) and occ.lengths == pytest.approx((0.3,))
    assert t == pytest.approx(0.5)
    assert piece(0.2) == pytest.approx(0.3)
    assert piece(0.45) == pytest.approx(0.05)


def test_park_skips_occupied_block():
    occ, t, piece = park_caravan(ArcSet((0.2,), (0.3,)), 0.4, 0.3)
    assert occ.starts == (0.2,) and occ.lengths[0] == pytest.approx(0.6)
    assert t == pytest.approx(0.8)
    # flat over the old block, then slope -1 down to zero at the landing point
    assert piece(0.45) == pytest.approx(0.3)
    assert piece(0.6) == pytest.approx(0.2)
    assert piece(0.9) == 0.0


def test_park_wraps_through_zero():
    occ, t, _ = park_caravan(ArcSet(), 0.9, 0.2)
    assert occ.starts == (0.9,) and occ.lengths[0] == pytest.approx(0.2)
    assert t == pytest.approx(0.1)


def test_capacity_exceeded():
    with pytest.raises(ValueError, match="capacity exceeded"):
        park_caravan(ArcSet((0.0,), (0.8,)), 0.5, 0.3)


def test_run_parking_examples():
    traj = run_parking(CaravanInstance([0.5, 0.5], [0.0, 0.25]))
    assert traj.partitions[1].tolist() == [0.5]
    assert traj.partitions[2].tolist() == [1.0]
    traj = run_parking(CaravanInstance([0.3, 0.3], [0.2, 0.6]))
    assert traj.partitions[2] == pytest.approx([0.3, 0.3])
    assert traj.arcsets[2].starts == (0.2, 0.6)
    traj = run_parking(CaravanInstance([0.3, 0.3], [0.2, 0.4]))
    assert traj.partitions[2] == pytest.approx([0.6])
    assert traj.arcsets[2].starts == (0.2,)


def test_profile_examples():
    inst = CaravanInstance([0.3, 0.3], [0.2, 0.4])
    h0 = profile(inst, 0)
    assert np.all(h0.right_values == 0) and np.all(h0.slopes == 0)
    h1 = profile(CaravanInstance([0.3], [0.2]), 1)
    assert h1.value(0.3) == pytest.approx(0.2)
    assert h1.value(0.6) == 0.0 and h1.value(0.1) == 0.0
    h2 = profile(inst, 2)
    assert h2.value(0.4) - h2.left_limit(0.4) == pytest.approx(0.3)
    assert h2.value(0.4) == pytest.approx(0.4)
    assert abs(h2.left_limit(0.8)) <= 1e-12


def test_backward_index_arithmetic():
    assert backward_index(4, 0.25, 2.0, 1.0) == 2
    assert backward_index(100, 0.01, 2.0, 0.5) == 95


def test_backward_marginal_examples():
    inst = CaravanInstance([0.25] * 4, [0.1, 0.3, 0.5, 0.7])
    assert backward_marginal(inst, 0.25, 2.0, 0.0).tolist() == [1.0]
    assert backward_marginal(inst, 0.25, 2.0, 1.0) == pytest.approx(ranked(park_to_step(inst, 2).lengths))
    assert backward_marginal(inst, 0.25, 2.0, 2.0).tolist() == []
    with pytest.raises(ValueError, match="time beyond process start"):
        backward_marginal(inst, 0.25, 2.0, 3.0)


def test_trajectory_csv():
    buf = io.StringIO()
    write_trajectory_csv(run_parking(CaravanInstance([0.3, 0.3], [0.2, 0.6])), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "step,block_rank,block_start,block_length"
    assert len(lines) == 1 + 1 + 2


@given(instances(complete=False))
@settings(max_examples=200, deadline=None)
def test_mass_conservation_and_monotone_sets(inst):
    traj = run_parking(inst)
    cum = np.cumsum(inst.masses)
    for i in range(1, inst.m + 1):
        a = traj.arcsets[i]
        assert abs(a.total_length - cum[i - 1]) <= 1e-12
        # every earlier block midpoint stays covered
        prev = traj.arcsets[i - 1]
        mids = np.mod(np.array(prev.starts) + 0.5 * np.array(prev.lengths), 1.0)
        assert a.contains(mids).all()


@given(instances())
@settings(max_examples=200, deadline=None)
def test_profile_invariants_hold(inst):
    worst = check_profile_invariants(inst)
    assert max(worst.values()) <= 1e-12, worst


def test_profiles_equal_sum_of_pieces(rng):
    for _ in range(50):
        inst = complete_instance(rng, int(rng.integers(1, 30)))
        occ = ArcSet()
        pieces = []
        for s, p in zip(inst.arrival_points, inst.masses):
            occ, _, piece = park_caravan(occ, s, p)
            pieces.append(piece)
        x = rng.random(200)
        for i, prof in enumerate(profiles(inst)):
            expect = sum((pc(x) for pc in pieces[:i]), np.zeros_like(x))
            assert np.max(np.abs(prof.value(x) - expect)) <= 1e-12


def test_park_to_step_matches_trajectory(rng):
    inst = complete_instance(rng, 25)
    traj = run_parking(inst)
    for i in (0, 5, 25):
        assert park_to_step(inst, i) == traj.arcsets[i]


@pytest.mark.parametrize("points", [[0.5, 1e-12, 0.0], [0.3, 0.3 + 5e-13, 1 - 1e-13], [1e-13, 2e-13, 0.0]])
def test_near_coincident_arrivals(points):
    inst = CaravanInstance([2 / 7, 3 / 7, 1 - 5 / 7], points)
    traj = run_parking(inst)
    assert traj.arcsets[-1].total_length == pytest.approx(1.0, abs=1e-11)
    assert check_profile_invariants(inst, traj)["mass"] <= 1e-11
