"""Core value types shared by the simulators.

Everything here is deterministic.  Circle points are plain floats in [0, 1)
(fractions of the circumference); arcs are half-open, so the right endpoint of
an occupied block is free, and two blocks that touch are one block.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def wrap(x):
    """Project a real (or array of reals) onto [0, 1)."""
    y = np.mod(x, 1.0)
    # mod can round up to exactly 1.0 for tiny negative inputs
    return np.where(y >= 1.0, 0.0, y) if isinstance(y, np.ndarray) else (0.0 if y >= 1.0 else float(y))


def ranked(masses) -> np.ndarray:
    """Nonincreasing array of the positive entries of ``masses``."""
    a = np.asarray(masses, dtype=float).ravel()
    a = a[a > 0]
    return -np.sort(-a)


def partition_distance(a, b) -> float:
    """Componentwise sup distance between two ranked partitions, zero padded."""
    a, b = ranked(a), ranked(b)
    n = max(len(a), len(b))
    if n == 0:
        return 0.0
    pa = np.zeros(n)
    pb = np.zeros(n)
    pa[: len(a)] = a
    pb[: len(b)] = b
    return float(np.max(np.abs(pa - pb)))


@dataclass(frozen=True, eq=False)
class CaravanInstance:
    """Caravan masses ``p_i`` and arrival points ``s_i``, in arrival order."""

    masses: np.ndarray
    arrival_points: np.ndarray

    def __post_init__(self):
        p = _frozen(self.masses)
        s = _frozen(self.arrival_points)
        if p.ndim != 1 or p.shape != s.shape:
            raise ValueError("masses and arrival_points must be 1-d of equal length")
        if len(p) < 1:
            raise ValueError("an instance needs at least one caravan")
        if np.any(p <= 0):
            raise ValueError("caravan masses must be positive")
        if p.sum() > 1 + TOL:
            raise ValueError("total caravan mass exceeds the circle")
        if np.any(s < 0) or np.any(s >= 1):
            raise ValueError("arrival points must lie in [0, 1)")
        object.__setattr__(self, "masses", p)
        object.__setattr__(self, "arrival_points", s)

    @property
    def m(self) -> int:
        return len(self.masses)

    @property
    def complete(self) -> bool:
        return abs(float(np.sum(self.masses)) - 1.0) <= TOL


class _Segments:
    """Mutable sorted list of disjoint half-open segments ``[a, b)`` inside [0, 1].

    A block wrapping through 0 is stored as two segments, one ending at 1 and
    one starting at 0.  Only exactly touching neighbours merge on insert.
    """

    def __init__(self, starts=(), ends=()):
        self.starts: list[float] = list(starts)
        self.ends: list[float] = list(ends)
        self.measure = self.total()

    def __len__(self):
        return len(self.starts)

    def locate(self, x: float) -> int:
        """Index of the last segment starting at or before ``x`` (-1 if none)."""
        return bisect_right(self.starts, x) - 1

    def overlap(self, a: float, b: float) -> float:
        k = max(self.locate(a), 0)
        total = 0.0
        while k < len(self.starts) and self.starts[k] < b:
            total += max(0.0, min(b, self.ends[k]) - max(a, self.starts[k]))
            k += 1
        return total

    def add(self, a: float, b: float) -> None:
        a, b = max(a, 0.0), min(b, 1.0)
        if b - a <= 0:
            return
        starts, ends = self.starts, self.ends
        k = bisect_right(starts, a)
        left = k > 0 and ends[k - 1] >= a
        right = k < len(starts) and starts[k] <= b
        if left and right:
            self.measure += starts[k] - ends[k - 1]
            ends[k - 1] = ends[k]
            del starts[k], ends[k]
        elif left:
            self.measure += max(ends[k - 1], b) - ends[k - 1]
            ends[k - 1] = max(ends[k - 1], b)
        elif right:
            old = ends[k] - starts[k]
            starts[k] = min(starts[k], a)
            ends[k] = max(ends[k], b)
            self.measure += ends[k] - starts[k] - old
        else:
            starts.insert(k, a)
            ends.insert(k, b)
            self.measure += b - a

    def total(self) -> float:
        return float(np.sum(np.subtract(self.ends, self.starts))) if self.starts else 0.0

    def to_arcset(self) -> ArcSet:
        """Arc view; gaps of at most ``TOL`` (including the one through 0) are closed."""
        if not self.starts:
            return ArcSet()
        ms, me = [self.starts[0]], [self.ends[0]]
        for a, b in zip(self.starts[1:], self.ends[1:]):
            if a - me[-1] <= TOL:
                me[-1] = b
            else:
                ms.append(a)
                me.append(b)
        if ms[0] + 1.0 - me[-1] > TOL:
            return ArcSet(tuple(ms), tuple(e - a for a, e in zip(ms, me)))
        if len(ms) == 1:
            return ArcSet((0.0,), (1.0,))
        # glue the piece near 0 onto the piece ending near 1
        lengths = [e - a for a, e in zip(ms, me)]
        lengths[-1] = me[0] + 1.0 - ms[-1]
        return ArcSet(tuple(ms[1:]), tuple(lengths[1:]))


@dataclass(frozen=True)
class ArcSet:
    """Disjoint union of half-open circular arcs ``[start, start + length)``.

    Arcs are sorted by start; at most one arc wraps through 0 and it is the
    last one.  The full circle is the single arc ``[0, 1)``.
    """

    starts: tuple[float, ...] = ()
    lengths: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.starts) != len(self.lengths):
            raise ValueError("starts and lengths differ in size")
        segs = self._split()
        for k in range(len(segs) - 1):
            if segs[k][1] >= segs[k + 1][0] - TOL:
                raise ValueError("arcs overlap or touch; ArcSet must be normalized")
        for a, ln in zip(self.starts, self.lengths):
            if not (0 <= a < 1) or not (0 < ln <= 1 + TOL):
                raise ValueError(f"invalid arc [{a}, {a + ln})")
        if sum(self.lengths) > 1 + TOL:
            raise ValueError("total arc length exceeds the circle")

    def _split(self) -> list[tuple[float, float]]:
        out = []
        for a, ln in zip(self.starts, self.lengths):
            b = a + ln
            if b > 1.0 + TOL:
                out.append((0.0, b - 1.0))
                out.append((a, 1.0))
            else:
                out.append((a, min(b, 1.0)))
        out.sort()
        return out

    def segments(self) -> _Segments:
        segs = self._split()
        return _Segments([s for s, _ in segs], [e for _, e in segs])

    @property
    def total_length(self) -> float:
        return float(sum(self.lengths))

    @property
    def full(self) -> bool:
        return len(self.lengths) == 1 and self.lengths[0] >= 1 - TOL

    def contains(self, x):
        """Vectorized membership test for points of [0, 1)."""
        segs = self._split()
        x = np.asarray(x, dtype=float)
        if not segs:
            return np.zeros(x.shape, dtype=bool)
        s = np.array([a for a, _ in segs])
        e = np.array([b for _, b in segs])
        idx = np.searchsorted(s, x, side="right") - 1
        ok = idx >= 0
        out = np.zeros(x.shape, dtype=bool)
        out[ok] = x[ok] < e[idx[ok]]
        return out

    def rotate(self, offset: float) -> ArcSet:
        segs = _Segments()
        for a, ln in zip(self.starts, self.lengths):
            a2 = wrap(a + offset)
            if a2 + ln > 1.0:
                segs.add(a2, 1.0)
                segs.add(0.0, a2 + ln - 1.0)
            else:
                segs.add(a2, a2 + ln)
        return segs.to_arcset()


def arc_insert(arcs: ArcSet, start: float, length: float) -> ArcSet:
    """Union of ``arcs`` with the arc ``[start, start + length)``.

    The new arc may touch existing ones (they merge) but not overlap them.
    """
    if not (0 < length <= 1 + TOL):
        raise ValueError("arc length must lie in (0, 1]")
    start = wrap(start)
    segs = arcs.segments()
    end = start + length
    pieces = [(start, min(end, 1.0))]
    if end > 1.0:
        pieces.append((0.0, end - 1.0))
    for a, b in pieces:
        if segs.overlap(a, b) > TOL:
            raise ValueError("overlapping arc")
    for a, b in pieces:
        segs.add(a, b)
    return segs.to_arcset()


def ranked_lengths(arcs: ArcSet) -> np.ndarray:
    return ranked(arcs.lengths)


@dataclass(frozen=True, eq=False)
class JumpDriftPath:
    """``x -> slope*x + sum(size_j for location_j <= x)`` on [0, 1).

    Extended to the real line by ``value(x + 1) = value(x) + value(1-)``.
    """

    slope: float
    locations: np.ndarray
    sizes: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float).ravel()
        size = np.asarray(self.sizes, dtype=float).ravel()
        if loc.shape != size.shape:
            raise ValueError("locations and sizes differ in size")
        if not self.slope < 0:
            raise ValueError("slope must be negative")
        if np.any(size <= 0):
            raise ValueError("jump sizes must be positive")
        if np.any(loc < 0) or np.any(loc >= 1):
            raise ValueError("jump locations must lie in [0, 1)")
        order = np.argsort(loc, kind="stable")
        object.__setattr__(self, "slope", float(self.slope))
        object.__setattr__(self, "locations", _frozen(loc[order]))
        object.__setattr__(self, "sizes", _frozen(size[order]))
        object.__setattr__(self, "_cum", _frozen(np.concatenate(([0.0], np.cumsum(self.sizes)))))

    @property
    def total_jump(self) -> float:
        return float(self._cum[-1])

    @property
    def end_value(self) -> float:
        """``value(1-)``."""
        return self.slope + self.total_jump

    def _eval(self, x, side):
        x = np.asarray(x, dtype=float)
        whole = np.floor(x)
        frac = x - whole
        idx = np.searchsorted(self.locations, frac, side=side)
        out = self.slope * frac + self._cum[idx] + whole * self.end_value
        return out if out.ndim else float(out)

    def value(self, x):
        return self._eval(x, "right")

    def left_limit(self, x):
        return self._eval(x, "left")


@dataclass(frozen=True, eq=False)
class GridPath:
    """Path sampled at ``x = k/G`` for ``k = 0..G``."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(np.asarray(self.values, dtype=float).ravel())
        if len(v) < 2:
            raise ValueError("a grid path needs at least two values")
        object.__setattr__(self, "values", v)

    @property
    def grid_size(self) -> int:
        return len(self.values) - 1

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.grid_size + 1) / self.grid_size


@dataclass(frozen=True, eq=False)
class Profile:
    """Piecewise linear circle function stored on breakpoints.

    ``right_values[k]`` is the value at ``points[k]``; on the cell from
    ``points[k]`` to the next point (cyclically) the slope is ``slopes[k]``.
    Jumps happen only at breakpoints.
    """

    points: np.ndarray
    right_values: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        for name in ("points", "right_values", "slopes"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def cell_lengths(self) -> np.ndarray:
        nxt = np.append(self.points[1:], self.points[0] + 1.0)
        return nxt - self.points

    @property
    def left_limits(self) -> np.ndarray:
        """Left limit at each breakpoint."""
        end_vals = self.right_values + self.slopes * self.cell_lengths
        return np.roll(end_vals, 1)

    @property
    def jumps(self) -> np.ndarray:
        return self.right_values - self.left_limits

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.right_values >= -TOL) and np.all(self.left_limits >= -TOL))

    def _eval(self, x, side):
        x = wrap(np.asarray(x, dtype=float))
        k = np.searchsorted(self.points, x, side=side) - 1
        k = np.where(k < 0, len(self.points) - 1, k)
        dx = np.mod(x - self.points[k], 1.0)
        if side == "left":
            # x sitting on a breakpoint is reached from the previous cell
            dx = np.where(dx == 0, self.cell_lengths[k], dx)
        out = self.right_values[k] + self.slopes[k] * dx
        return out if out.ndim else float(out)

    def value(self, x):
        return self._eval(x, "right")

    def left_limit(self, x):
        return self._eval(x, "left")


@dataclass(frozen=True, eq=False)
class ThetaSequence:
    """Brownian weight ``theta0`` and ranked atoms with unit sum of squares."""

    theta0: float
    atoms: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        atoms = _frozen(np.asarray(self.atoms, dtype=float).ravel())
        if self.theta0 < 0 or np.any(atoms <= 0):
            raise ValueError("theta entries must be nonnegative, atoms positive")
        if np.any(np.diff(atoms) > 0):
            raise ValueError("atoms must be nonincreasing")
        norm = self.theta0**2 + float(np.sum(atoms**2))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"sum of squares is {norm}, expected 1")
        object.__setattr__(self, "theta0", float(self.theta0))
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def normalized(cls, theta0: float, atoms, truncated: bool = False) -> ThetaSequence:
        atoms = -np.sort(-np.asarray(atoms, dtype=float))
        norm = np.sqrt(theta0**2 + np.sum(atoms**2))
        return cls(theta0 / norm, atoms / norm, truncated)
