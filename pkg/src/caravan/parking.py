"""Sequential covering of the circle by caravans.

Each caravan of mass ``p`` arriving at ``s`` fills free space clockwise from
``s``, skipping occupied blocks, until its mass is used up.  The engine scans
block boundaries only, so a step costs ``O(log m)`` plus the number of blocks
it swallows.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .model import TOL, ArcSet, CaravanInstance, Profile, _Segments, ranked, wrap


class Piece(NamedTuple):
    """The function ``h`` of one caravan, on the unrolled arc ``[s, s + travelled]``.

    ``points`` are unrolled breakpoints starting at ``s``; ``values`` are the
    right values there and ``slopes`` the slope on each cell (0 over old
    blocks, -1 over newly painted space).
    """

    points: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    def __call__(self, x):
        """Evaluate at circle point(s) ``x``; zero outside the painted arc."""
        x = np.asarray(x, dtype=float)
        u = self.points[0] + np.mod(x - self.points[0], 1.0)
        end = self.points[-1]
        k = np.clip(np.searchsorted(self.points, u, side="right") - 1, 0, len(self.slopes) - 1)
        out = np.where(u < end, self.values[k] + self.slopes[k] * (u - self.points[k]), 0.0)
        return out if out.ndim else float(out)


class _Lot:
    """Mutable occupied set; the public functions below wrap it."""

    def __init__(self, segs: _Segments | None = None):
        self.segs = segs if segs is not None else _Segments()
        # mass handed in so far, to tell rounding leftovers from real ones
        self.placed = self.segs.measure

    def park(self, s: float, p: float) -> tuple[float, float]:
        """Park mass ``p`` from ``s``; return (landing point, travelled length)."""
        if p <= 0:
            raise ValueError("caravan mass must be positive")
        segs = self.segs
        if p > 1.0 - segs.measure + TOL:
            raise ValueError("capacity exceeded")
        slack = max(segs.measure - self.placed, 0.0) + TOL
        self.placed += p
        x, remaining, travelled = float(s), float(p), 0.0
        while True:
            if travelled > 1.0 + TOL:
                raise ValueError("capacity exceeded")
            k = segs.locate(x)
            if k >= 0 and x < segs.ends[k]:
                travelled += segs.ends[k] - x
                x = segs.ends[k]
                if x >= 1.0:
                    x = 0.0
                    continue
            gap_end = segs.starts[k + 1] if k + 1 < len(segs) else 1.0
            gap = gap_end - x
            if remaining <= gap + TOL:
                land = min(x + remaining, gap_end)
                segs.add(x, land)
                travelled += land - x
                return wrap(land), travelled
            segs.add(x, gap_end)
            remaining -= gap
            travelled += gap
            if remaining <= slack:
                # rounding leftover only
                return wrap(gap_end), travelled
            x = 0.0 if gap_end >= 1.0 else gap_end


def _piece(segs: _Segments, s: float, p: float, travelled: float) -> Piece:
    """Breakpoint form of ``h`` for a caravan about to park into ``segs``."""
    starts, ends = np.asarray(segs.starts), np.asarray(segs.ends)
    # occupied boundaries, unrolled onto [s, s + 1)
    bounds = np.concatenate((starts, ends))
    bounds = s + np.mod(bounds - s, 1.0)
    end = s + travelled
    pts = np.unique(np.concatenate(([s], bounds[(bounds > s) & (bounds < end)], [end])))
    mids = wrap(0.5 * (pts[:-1] + pts[1:]))
    k = np.searchsorted(starts, mids, side="right") - 1
    occ = np.zeros(len(mids), dtype=bool)
    ok = k >= 0
    occ[ok] = mids[ok] < ends[k[ok]]
    free = np.diff(pts) * ~occ
    values = p - np.concatenate(([0.0], np.cumsum(free)))
    slopes = np.where(occ, 0.0, -1.0)
    return Piece(pts, values[:-1], slopes)


def park_caravan(occupied: ArcSet, s: float, p: float) -> tuple[ArcSet, float, Piece]:
    """Park one caravan into ``occupied``.

    Returns the new occupied set, the landing point ``t`` and the caravan's
    ``h`` function.  The landing is never interior to an old block.
    """
    lot = _Lot(occupied.segments())
    before = _Segments(lot.segs.starts, lot.segs.ends)
    landing, travelled = lot.park(wrap(s), p)
    return lot.segs.to_arcset(), landing, _piece(before, wrap(s), p, travelled)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """``arcsets[i]`` is ``A_i``; ``landings[i-1]`` is ``t_i``."""

    arcsets: tuple[ArcSet, ...]
    landings: np.ndarray
    travelled: np.ndarray

    @property
    def partitions(self) -> list[np.ndarray]:
        return [ranked(a.lengths) for a in self.arcsets]

    def rows(self) -> Iterator[tuple[int, int, float, float]]:
        """CSV rows ``step, block_rank, block_start, block_length``."""
        for step, arcs in enumerate(self.arcsets):
            order = sorted(range(len(arcs.lengths)), key=lambda k: (-arcs.lengths[k], arcs.starts[k]))
            for rank, k in enumerate(order, start=1):
                yield step, rank, arcs.starts[k], arcs.lengths[k]


def run_parking(instance: CaravanInstance) -> Trajectory:
    lot = _Lot()
    arcsets = [ArcSet()]
    landings = np.empty(instance.m)
    travelled = np.empty(instance.m)
    for i, (s, p) in enumerate(zip(instance.arrival_points, instance.masses)):
        landings[i], travelled[i] = lot.park(float(s), float(p))
        arcsets.append(lot.segs.to_arcset())
    return Trajectory(tuple(arcsets), landings, travelled)


def park_to_step(instance: CaravanInstance, i: int) -> ArcSet:
    """``A_i`` without storing the intermediate sets."""
    if not 0 <= i <= instance.m:
        raise ValueError("step index out of range")
    lot = _Lot()
    for s, p in zip(instance.arrival_points[:i], instance.masses[:i]):
        lot.park(float(s), float(p))
    return lot.segs.to_arcset()


def backward_index(m: int, eps: float, alpha: float, t: float) -> int:
    """``m - floor(t * eps**(-1/alpha))``, the step observed at backward time ``t``."""
    # the guard keeps e.g. 0.5 * 100.00000000000001 from flooring to 49
    return m - int(math.floor(t * eps ** (-1.0 / alpha) + 1e-9))


def backward_marginal(instance: CaravanInstance, eps: float, alpha: float, t: float) -> np.ndarray:
    i = backward_index(instance.m, eps, alpha, t)
    if i < 0:
        raise ValueError("time beyond process start")
    return ranked(park_to_step(instance, i).lengths)


def write_trajectory_csv(trajectory: Trajectory, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["step", "block_rank", "block_start", "block_length"])
    for step, rank, start, length in trajectory.rows():
        w.writerow([step, rank, repr(float(start)), repr(float(length))])


# --- profiles -------------------------------------------------------------


def _breakpoints(instance: CaravanInstance, landings: np.ndarray) -> np.ndarray:
    pts = np.sort(np.concatenate(([0.0], instance.arrival_points, wrap(landings))))
    keep = np.concatenate(([True], np.diff(pts) > TOL))
    pts = pts[keep]
    if len(pts) > 1 and pts[-1] > 1.0 - TOL:
        pts = pts[:-1]
    # a landing within TOL of an arrival point is represented by the arrival point
    s = instance.arrival_points
    idx = _nearest(pts, s)
    close = (np.abs(pts[idx] - s) <= TOL) & (idx > 0)
    pts[idx[close]] = s[close]
    return pts


def _nearest(pts: np.ndarray, x: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(pts, x)
    idx = np.clip(idx, 0, len(pts))
    lo = np.clip(idx - 1, 0, len(pts) - 1)
    hi = idx % len(pts)
    d_lo = np.abs(x - pts[lo])
    d_hi = np.abs(np.mod(pts[hi] - x + 0.5, 1.0) - 0.5)
    return np.where(d_lo <= d_hi, lo, hi)


def profiles(instance: CaravanInstance, trajectory: Trajectory | None = None) -> Iterator[Profile]:
    """Yield ``H_0, H_1, ..., H_m`` as exact breakpoint profiles.

    ``H_i`` is the sum of the per-caravan functions ``h_j``, each built from
    the repartition function of the occupied set before caravan ``j``.  All
    breakpoints lie in ``{0} U {s_j} U {t_j}``, so a fixed cell grid is used.
    """
    traj = trajectory if trajectory is not None else run_parking(instance)
    pts = _breakpoints(instance, traj.landings)
    n = len(pts)
    cell = np.append(pts[1:], pts[0] + 1.0) - pts
    s_idx = _nearest(pts, instance.arrival_points)
    t_idx = _nearest(pts, wrap(traj.landings))
    # cells crossed by caravan j, counted on the grid so snapping cannot lose one
    reach = (t_idx - s_idx) % n
    reach[(reach == 0) & (traj.travelled > 0.5)] = n
    H = np.zeros(n)
    slopes = np.zeros(n)
    painted = np.zeros(n, dtype=bool)
    yield Profile(pts, H, slopes)
    for j in range(instance.m):
        order = (s_idx[j] + np.arange(n)) % n
        cells = order[:reach[j]]
        free = ~painted[cells]
        h = instance.masses[j] - np.concatenate(([0.0], np.cumsum(cell[cells] * free)[:-1]))
        H[cells] += h
        slopes[cells] -= free
        painted[cells] = True
        yield Profile(pts, H, slopes)


def profile(instance: CaravanInstance, i: int) -> Profile:
    if not 0 <= i <= instance.m:
        raise ValueError("step index out of range")
    for k, prof in enumerate(profiles(instance)):
        if k == i:
            return prof
    raise AssertionError("unreachable")


def check_profile_invariants(instance: CaravanInstance, trajectory: Trajectory | None = None) -> dict[str, float]:
    """Largest violation of each profile property over all steps.

    Keys: ``support`` (cells where positivity of ``H`` disagrees with
    membership in ``A_i``), ``landing`` (``|H_i(t_i-)|``), ``jumps``,
    ``slope``, ``block`` (the within-block identity at every breakpoint),
    ``negative`` (most negative value), ``mass`` (``|Leb(A_i) - sum p|``).
    """
    traj = trajectory if trajectory is not None else run_parking(instance)
    worst = dict.fromkeys(("support", "landing", "jumps", "slope", "block", "negative", "mass"), 0.0)
    expected_jump = None
    s_idx = None
    cum_mass = np.cumsum(instance.masses)
    for i, prof in enumerate(profiles(instance, traj)):
        pts = prof.points
        if expected_jump is None:
            expected_jump = np.zeros(len(pts))
            s_idx = _nearest(pts, instance.arrival_points)
            continue
        expected_jump[s_idx[i - 1]] += instance.masses[i - 1]
        arcs = traj.arcsets[i]
        worst["mass"] = max(worst["mass"], abs(arcs.total_length - cum_mass[i - 1]))
        cell = prof.cell_lengths
        in_a = arcs.contains(wrap(pts + 0.5 * cell))
        right = prof.right_values
        end_vals = right + prof.slopes * cell
        left = prof.left_limits

        positive = (right > TOL) & (end_vals >= -TOL)
        zero = (np.abs(right) <= TOL) & (prof.slopes == 0)
        worst["support"] = max(worst["support"], float(np.sum(in_a & ~positive) + np.sum(~in_a & ~zero)))
        worst["landing"] = max(worst["landing"], abs(prof.left_limit(traj.landings[i - 1])))
        worst["jumps"] = max(worst["jumps"], float(np.max(np.abs(prof.jumps - expected_jump))))
        worst["slope"] = max(worst["slope"], float(np.max(np.abs(prof.slopes + in_a))))
        worst["negative"] = max(worst["negative"], float(-min(right.min(), left.min(), 0.0)))

        # H(x) = H(v-) - (x - v) + sum of jumps in [v, x] along each block [v, v')
        first = 0 if in_a.all() else int(np.flatnonzero(~in_a)[0])
        order = (first + np.arange(len(pts))) % len(pts)
        x = pts[order[0]] + np.concatenate(([0.0], np.cumsum(cell[order])[:-1]))
        J = expected_jump[order]
        cumJ = np.cumsum(J)
        ina = in_a[order]
        starts = ina & ~np.roll(ina, 1)
        if ina.all():
            starts[:] = False
            starts[0] = True
        group = np.cumsum(starts) - 1
        q = right[order] + x - cumJ
        v = np.flatnonzero(starts)
        q_start = left[order][v] + x[v] - (cumJ[v] - J[v])
        if ina.any():
            dev = np.abs(q[ina] - q_start[group[ina]])
            worst["block"] = max(worst["block"], float(dev.max()))
    return worst
