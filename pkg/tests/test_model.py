import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caravan.model import (ArcSet, CaravanInstance, JumpDriftPath, Profile, ThetaSequence, arc_insert,
                           partition_distance, ranked_lengths, wrap)


def test_insert_into_empty():
    a = arc_insert(ArcSet(), 0.2, 0.3)
    assert a.starts == (0.2,)
    assert a.lengths == pytest.approx((0.3,))


def test_touching_arcs_merge():
    a = arc_insert(ArcSet((0.2,), (0.3,)), 0.5, 0.3)
    assert a.starts == (0.2,)
    assert a.lengths[0] == pytest.approx(0.6)


def test_merge_through_zero():
    a = arc_insert(ArcSet((0.9,), (0.1,)), 0.0, 0.1)
    assert a.starts == (0.9,)
    assert a.lengths[0] == pytest.approx(0.2)
    assert a.contains(np.array([0.95, 0.05, 0.12, 0.5])).tolist() == [True, True, False, False]


def test_overlap_rejected():
    with pytest.raises(ValueError, match="overlapping arc"):
        arc_insert(ArcSet((0.2,), (0.3,)), 0.4, 0.2)


def test_ranked_lengths_examples():
    assert ranked_lengths(ArcSet()).tolist() == []
    assert ranked_lengths(ArcSet((0.2, 0.7), (0.3, 0.1))) == pytest.approx([0.3, 0.1])
    assert ranked_lengths(ArcSet((0.0,), (1.0,))).tolist() == [1.0]


def test_full_circle_from_pieces():
    a = arc_insert(arc_insert(ArcSet(), 0.3, 0.5), 0.8, 0.5)
    assert a.full and a.starts == (0.0,)


def test_arcset_rejects_touching_arcs():
    with pytest.raises(ValueError):
        ArcSet((0.2, 0.5), (0.3, 0.1))


def test_half_open_membership():
    a = ArcSet((0.2,), (0.3,))
    assert a.contains(np.array([0.2, 0.5])).tolist() == [True, False]


@given(st.lists(st.tuples(st.floats(0, 1, exclude_max=True), st.floats(0.001, 0.2)), max_size=30),
       st.floats(0, 1, exclude_max=True))
@settings(max_examples=200, deadline=None)
def test_inserts_add_length_and_ranking_is_rotation_invariant(arcs, offset):
    cur = ArcSet()
    for start, length in arcs:
        if cur.total_length + length > 1:
            continue
        try:
            nxt = arc_insert(cur, start, length)
        except ValueError:
            continue
        assert nxt.total_length == pytest.approx(cur.total_length + length, abs=1e-12)
        cur = nxt
    rot = cur.rotate(offset)
    assert partition_distance(ranked_lengths(rot), ranked_lengths(cur)) <= 1e-12
    assert rot.total_length == pytest.approx(cur.total_length, abs=1e-12)


def test_instance_validation():
    with pytest.raises(ValueError):
        CaravanInstance([0.6, 0.6], [0.1, 0.2])
    with pytest.raises(ValueError):
        CaravanInstance([0.5], [1.0])
    with pytest.raises(ValueError):
        CaravanInstance([], [])
    assert CaravanInstance([0.5, 0.5], [0.0, 0.3]).complete
    assert not CaravanInstance([0.5], [0.0]).complete


def test_jump_drift_path_values():
    p = JumpDriftPath(-1.0, [0.6, 0.2], [0.7, 0.3])
    assert p.value(0.5) == pytest.approx(-0.2)
    assert p.left_limit(0.2) == pytest.approx(-0.2)
    assert p.value(0.2) == pytest.approx(0.1)
    assert p.end_value == pytest.approx(0.0)
    # periodic extension
    assert p.value(1.5) == pytest.approx(p.value(0.5) + p.end_value)


def test_profile_one_sided_values():
    prof = Profile([0.0, 0.2, 0.5], [0.0, 0.3, 0.0], [0.0, -1.0, 0.0])
    assert prof.value(0.3) == pytest.approx(0.2)
    assert prof.left_limit(0.5) == pytest.approx(0.0)
    assert prof.left_limit(0.2) == 0.0
    assert prof.jumps.tolist() == pytest.approx([0.0, 0.3, 0.0])
    assert prof.nonnegative


def test_theta_sequence_checks():
    ThetaSequence(0.0, [0.8, 0.6])
    with pytest.raises(ValueError):
        ThetaSequence(0.0, [0.6, 0.8])
    with pytest.raises(ValueError):
        ThetaSequence(0.5, [0.5])
    t = ThetaSequence.normalized(0.0, [3.0, 4.0])
    assert t.atoms.tolist() == pytest.approx([0.8, 0.6])


def test_wrap():
    assert wrap(1.25) == pytest.approx(0.25)
    assert wrap(-1e-20) == 0.0
