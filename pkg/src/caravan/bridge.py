"""Bridge encoding of a parking state.

The occupied blocks after ``i`` caravans are the constancy intervals of the
running infimum of ``x -> -x + sum_{j<=i} p_j 1{x >= s_j}``, read from the
location of the minimum of the complete bridge.  Everything here is an exact
sweep over jump locations; between jumps the paths are strictly decreasing so
no other points matter.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import TOL, CaravanInstance, JumpDriftPath, ranked, wrap
from .parking import profiles, run_parking


def build_bridge(instance: CaravanInstance, i: int) -> JumpDriftPath:
    if not 1 <= i <= instance.m:
        raise ValueError("step index out of range")
    return JumpDriftPath(-1.0, instance.arrival_points[:i], instance.masses[:i])


def path_argmin(path: JumpDriftPath) -> tuple[float, float]:
    """First location of the minimum over left limits, and the minimum.

    Candidates are the left limits at the jumps and ``value(1-)``; the latter
    is the point 0 of the next period, reported as location 0.
    """
    if len(path.locations) == 0:
        raise ValueError("path has no jumps")
    locs = np.append(path.locations, 1.0)
    vals = np.append(path.left_limit(path.locations), path.end_value)
    k = int(np.argmin(vals))
    return wrap(float(locs[k])), float(vals[k])


def _rotated(path: JumpDriftPath, origin: float) -> tuple[np.ndarray, np.ndarray]:
    x = wrap(path.locations - origin)
    order = np.argsort(x, kind="stable")
    return x[order], path.sizes[order]


def _constancy_runs(x: np.ndarray, sizes: np.ndarray, drift: float, tol: float = TOL):
    """Constancy intervals of ``y -> inf_{[0, y]} f`` on [0, 1).

    ``f`` starts from level 0 just before ``y = 0``, decreases at rate
    ``drift`` and jumps by ``sizes`` at the sorted points ``x``.  Returns
    (starts, lengths).  Intervals separated by at most ``tol`` are merged,
    including across the wrap from 1 back to 0.
    """
    levels = np.concatenate(([0.0], np.cumsum(sizes))) - drift * np.append(x, 1.0)
    # levels[j] is f just before x[j]; the last entry is f(1-)
    prev_min = np.minimum.accumulate(np.concatenate(([0.0], levels[:-1])))
    rec = np.flatnonzero(levels < prev_min)
    pos = np.concatenate(([0.0], np.append(x, 1.0)[rec]))
    lev = np.concatenate(([0.0], levels[rec]))
    gaps = (lev[:-1] - lev[1:]) / drift
    starts = pos[:-1]
    lengths = pos[1:] - pos[:-1] - gaps
    if len(rec) == 0 or rec[-1] != len(levels) - 1:
        # the last record never gets undercut: its interval runs to the end
        starts = np.append(starts, pos[-1])
        lengths = np.append(lengths, 1.0 - pos[-1])
        gaps = np.append(gaps, 0.0)
    else:
        gaps[-1] = np.inf  # nothing after the terminal record
    return _merge(starts, lengths, gaps, tol)


def _merge(starts, lengths, gaps, tol):
    out_s: list[float] = []
    out_l: list[float] = []
    joined = False
    for a, ln, g in zip(starts, lengths, gaps):
        if joined:
            out_l[-1] += ln
        else:
            out_s.append(a)
            out_l.append(ln)
        joined = g <= tol
        if joined:
            out_l[-1] += g
    s, ln = np.array(out_s), np.array(out_l)
    if len(ln) > 1 and s[0] <= tol and ln[0] > tol and s[-1] + ln[-1] >= 1.0 - tol:
        ln[-1] += ln[0]
        s, ln = s[1:], ln[1:]
    keep = ln > tol
    return s[keep], ln[keep]


def constancy_intervals(path: JumpDriftPath, origin: float) -> tuple[np.ndarray, np.ndarray]:
    """Constancy intervals of the running infimum from ``origin``, in circle coordinates."""
    drift = -path.slope
    if path.total_jump > drift + TOL:
        raise ValueError("supercritical mass")
    x, sizes = _rotated(path, origin)
    starts, lengths = _constancy_runs(x, sizes, drift)
    return wrap(starts + origin), lengths


def constancy_blocks(path: JumpDriftPath, origin: float) -> np.ndarray:
    """Ranked lengths of the constancy intervals of ``x -> inf over [origin-, origin + x]``."""
    return ranked(constancy_intervals(path, origin)[1])


def vervaat(path: JumpDriftPath) -> JumpDriftPath:
    """Re-root ``path`` at its minimum; the result has left limit 0 at 0 and stays >= 0.

    A jump sitting at the minimum moves to location 0, so the value at 0
    itself is that jump's size.
    """
    origin, _ = path_argmin(path)
    x, sizes = _rotated(path, origin)
    return JumpDriftPath(path.slope, x, sizes)


@dataclass(frozen=True)
class LambReport:
    steps: int
    max_discrepancy: float
    worst_step: int
    passed: bool


def lamb_check(instance: CaravanInstance, tol: float = 1e-9) -> LambReport:
    """Compare parked block lengths with bridge constancy lengths at every step."""
    traj = run_parking(instance)
    full = build_bridge(instance, instance.m)
    origin, _ = path_argmin(full)
    worst, where = 0.0, 0
    for i in range(1, instance.m + 1):
        a = ranked(traj.arcsets[i].lengths)
        b = constancy_blocks(build_bridge(instance, i), origin)
        n = max(len(a), len(b))
        d = float(np.max(np.abs(np.pad(a, (0, n - len(a))) - np.pad(b, (0, n - len(b))))))
        if d > worst:
            worst, where = d, i
    return LambReport(instance.m, worst, where, worst <= tol)


def profile_bridge_gap(instance: CaravanInstance) -> float:
    """Largest ``|(H_m(x) - H_m(0)) - (b_m(x) - b_m(0))|`` over breakpoints, both one-sided values."""
    *_, last = profiles(instance)
    b = build_bridge(instance, instance.m)
    pts = last.points
    h0 = last.value(0.0)
    b0 = float(b.value(np.array([0.0]))[0])
    right = np.abs(last.right_values - h0 - (b.value(pts) - b0))
    left = np.abs(last.left_limits - h0 - (b.left_limit(pts) - b0))
    # left limit at 0 wraps around one period
    at0 = pts == 0.0
    if np.any(at0):
        left[at0] = abs(last.left_limits[at0][0] - h0 - (b.end_value - b0))
    return float(max(right.max(), left.max()))
