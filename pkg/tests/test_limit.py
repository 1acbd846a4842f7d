import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caravan.limit import (excursion_with_drift, extreme_bridge, fragment_intervals, fragmentation,
                           fragmentations, limit_scale, merge_dynamics_step, scaled_limit_bridge,
                           stable_loop_path, theorem1_shift)
from caravan.model import JumpDriftPath, ThetaSequence
from caravan.samplers import as_rng, brownian_bridge, derive_seed, neglected_variance, poisson_atoms


def test_forced_single_atom_loop():
    path = stable_loop_path(1.5, 1, 1, 0.1, 0, atoms=[1.0], locations=[0.5])
    assert path.value(0.75) == pytest.approx(0.25)
    assert path.value(0.25) == pytest.approx(-0.25)
    assert path.value(0.0) == 0.0 and path.end_value == pytest.approx(0.0, abs=1e-15)


def test_random_loop_is_a_bridge():
    path = stable_loop_path(1.5, 1, 3, 0.01, 5)
    assert path.value(0.0) == pytest.approx(0.0, abs=1e-12) or path.locations.min() == 0.0
    assert path.end_value == pytest.approx(0.0, abs=1e-9)


def test_band_variance_matches_integral():
    # atoms in (d1, d2] contribute Var(value(1/2)) = (1/4) * second moment of the band
    d1, d2 = 0.05, 0.5
    vals = []
    for k in range(20_000):
        rng = as_rng(derive_seed(31, k))
        a = poisson_atoms(1.5, 1, 3, d1, rng)
        a = a[a <= d2]
        u = rng.random(len(a))
        vals.append(float(np.sum(a * ((u <= 0.5) - 0.5))))
    vals = np.array(vals)
    target = (neglected_variance(1.5, 1, 3, d2) - neglected_variance(1.5, 1, 3, d1)) / 4
    sq = vals**2
    assert abs(sq.mean() - target) <= 3 * sq.std(ddof=1) / math.sqrt(len(sq))


def test_limit_scales():
    assert limit_scale(2, 1, 1) == 1.0
    assert limit_scale(2, 1, 2) == pytest.approx(math.sqrt(2))
    assert limit_scale(1.5, 3, c=1) == pytest.approx((math.sqrt(math.pi) / 1.5) ** (2 / 3))
    assert limit_scale(1.5, 3, c=1) == pytest.approx(1.117693, abs=1e-6)
    with pytest.raises(ValueError):
        limit_scale(2, 1, math.inf)


def test_shifts():
    assert theorem1_shift(2, 1, 1) == 0.0
    assert theorem1_shift(2, 1, 2) == pytest.approx(0.5 * math.log(2))
    assert theorem1_shift(1.5, 3, c=1) == pytest.approx(2 / 3 * math.log(math.sqrt(math.pi) / 1.5) - math.log(3))


def test_excursion_examples():
    g = scaled_limit_bridge(2.0, 4, mu1=1, mu2=1, grid=1024)
    e0 = excursion_with_drift(g, 0.0)
    assert e0.values.min() == 0.0 and e0.values[0] == 0.0
    assert excursion_with_drift(g, 0.7).values[-1] == pytest.approx(-0.7, abs=1e-12)
    j = JumpDriftPath(-1.0, [0.3], [1.0])
    assert excursion_with_drift(j, 0.5).slope == -1.5


def test_fragmentation_at_zero_is_whole():
    g = scaled_limit_bridge(2.0, 4, mu1=1, mu2=1, grid=1024)
    assert fragmentation(g, 0.0).tolist() == [1.0]
    j = JumpDriftPath(-1.0, [0.2, 0.6], [0.3, 0.7])
    assert fragmentation(j, 0.0) == pytest.approx([1.0])


def test_jump_sum_rule_example():
    j = JumpDriftPath(-1.0, [0.4], [1.0])
    assert abs(fragmentation(j, 1.0).sum() - 0.5) <= 1e-12


@given(st.lists(st.tuples(st.integers(0, 2**30 - 1), st.floats(0.01, 1.0)), min_size=1, max_size=40),
       st.floats(0.01, 5.0))
@settings(max_examples=200, deadline=None)
def test_sum_rule_after_drift(jumps, t):
    locs, sizes = zip(*jumps)
    S = sum(sizes)
    path = JumpDriftPath(-S, np.array(locs) / 2**30, sizes)
    assert abs(fragmentation(path, t).sum() - S / (S + t)) <= 1e-12


def _nested(fine, coarse, tol=1e-12):
    (fs, fl), (cs, cl) = fine, coarse
    for a, ln in zip(fs, fl):
        k = np.searchsorted(cs, a + tol, side="right") - 1
        if k < 0 or a + ln > cs[k] + cl[k] + tol:
            return False
    return True


@given(st.integers(0, 2**32), st.floats(0.0, 3.0), st.floats(0.01, 3.0))
@settings(max_examples=100, deadline=None)
def test_jump_fragments_nest(seed, t, dt):
    path = stable_loop_path(1.5, 1, 3, 0.05, seed)
    assert _nested(fragment_intervals(path, t + dt), fragment_intervals(path, t))


@pytest.mark.parametrize("seed", range(5))
def test_grid_fragments_nest(seed):
    g = scaled_limit_bridge(2.0, seed, mu1=1, mu2=1, grid=4096)
    for t, t2 in ((0.0, 0.5), (0.5, 1.0), (1.0, 2.0)):
        assert _nested(fragment_intervals(g, t2), fragment_intervals(g, t))


def test_fragmentations_match_single_calls():
    g = scaled_limit_bridge(2.0, 3, mu1=1, mu2=1, grid=2048)
    j = stable_loop_path(1.5, 1, 3, 0.05, 3)
    for path in (g, j):
        many = fragmentations(path, [0.5, 1.0, 2.0])
        for t, f in zip([0.5, 1.0, 2.0], many):
            assert np.array_equal(f, fragmentation(path, t))


def _top_change(seed, G, t=1.0):
    a = fragmentation(scaled_limit_bridge(2.0, seed, mu1=1, mu2=1, grid=G), t)[:10]
    b = fragmentation(scaled_limit_bridge(2.0, seed, mu1=1, mu2=1, grid=2 * G), t)[:10]
    n = min(len(a), len(b))
    return float(np.max(np.abs(a[:n] - b[:n])))


@pytest.mark.xfail(strict=True, reason="a Brownian path sampled finer uncovers new near-minima; "
                                         "top fragments move by order G**-0.5, not 4/G")
def test_grid_refinement_within_four_cells():
    G = 2**14
    assert all(_top_change(seed, G) <= 4 / G for seed in range(10))


def test_grid_refinement_converges():
    coarse = np.median([_top_change(seed, 2**10) for seed in range(10)])
    fine = np.median([_top_change(seed, 2**16) for seed in range(10)])
    assert fine < coarse


def test_brownian_refinement_coupling():
    v = brownian_bridge(2**12, 8).values
    assert np.array_equal(brownian_bridge(2**13, 8).values[::2], v)


def test_extreme_bridge_examples():
    G = 1024
    b = extreme_bridge(ThetaSequence(1.0, []), G, 6)
    assert np.array_equal(b.values, brownian_bridge(G, derive_seed(6, 1)).values)
    j = extreme_bridge(ThetaSequence(0.0, [1.0]), G, 6, locations=[0.25])
    x = np.arange(G + 1) / G
    expect = (x >= 0.25) - x
    expect[-1] = 0.0
    assert np.allclose(j.values, expect, atol=1e-12)
    mixed = extreme_bridge(ThetaSequence(0.6, [0.64, 0.48]), G, 7)
    assert mixed.values[0] == 0.0 and mixed.values[-1] == 0.0


def test_merge_examples():
    step = merge_dynamics_step([0.5, 0.5], 0)
    assert step.partition.tolist() == [1.0] and step.pair == (0, 1)
    with pytest.raises(ValueError):
        merge_dynamics_step([1.0], 0)


def test_merge_waiting_time_rate():
    rng = as_rng(3)
    w = np.array([merge_dynamics_step([0.6, 0.3, 0.1], rng).waiting_time for _ in range(20_000)])
    assert abs(w.mean() - 0.5) <= 3 * w.std(ddof=1) / math.sqrt(len(w))


def test_merge_pair_frequencies():
    rng = as_rng(4)
    n = 100_000
    picks = [merge_dynamics_step([0.6, 0.3, 0.1], rng).pair for _ in range(n)]
    pairs = [(0, 1), (0, 2), (1, 2)]
    s = [0.6, 0.3, 0.1]
    rates = [s[i] + s[j] for i, j in pairs]
    for pair, rate in zip(pairs, rates):
        p = rate / sum(rates)
        freq = sum(1 for q in picks if q == pair) / n
        assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / n)
