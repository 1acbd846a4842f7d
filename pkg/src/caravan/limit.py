"""Limit objects: stable loops, scaled Brownian bridges, excursions and their fragmentation."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .bridge import _constancy_runs, vervaat
from .model import GridPath, JumpDriftPath, ThetaSequence, ranked
from .samplers import as_rng, as_seedseq, brownian_bridge, derive_seed, poisson_atoms

DEFAULT_GRID = 2**20


def stable_loop_path(alpha: float, c: float, mu1: float, delta: float, seed,
                     atoms=None, locations=None) -> JumpDriftPath:
    """Compensated jump sum ``sum_i D_i (1{x >= U_i} - x)`` over atoms above ``delta``.

    Atoms are drawn first and then their uniform locations, from one stream.
    ``atoms``/``locations`` may be given to force a path.
    """
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    rng = as_rng(seed)
    if atoms is None:
        atoms = poisson_atoms(alpha, c, mu1, delta, rng)
    atoms = np.asarray(atoms, dtype=float)
    if locations is None:
        locations = rng.random(len(atoms))
    if len(atoms) == 0:
        raise ValueError("no atoms above delta")
    return JumpDriftPath(-float(np.sum(atoms)), locations, atoms)


def limit_scale(alpha: float, mu1: float, mu2: float | None = None, c: float | None = None) -> float:
    """Multiplier of the standard limit bridge for lengths with the given moments."""
    if alpha == 2:
        if mu2 is None or not math.isfinite(mu2):
            raise ValueError("alpha = 2 needs a finite second moment")
        return math.sqrt(mu2 / mu1)
    if not 1 < alpha < 2 or c is None or c <= 0 or mu1 <= 0:
        raise ValueError("alpha < 2 needs 1 < alpha and positive c, mu1")
    return (math.gamma(2 - alpha) * c / ((alpha - 1) * mu1)) ** (1 / alpha)


def theorem1_shift(alpha: float, mu1: float, mu2: float | None = None, c: float | None = None) -> float:
    """Time shift relating the backward parking marginals to the standard coalescent."""
    if mu1 <= 0:
        raise ValueError("mu1 must be positive")
    return math.log(limit_scale(alpha, mu1, mu2, c)) - math.log(mu1)


def scaled_limit_bridge(alpha: float, seed, *, mu1: float, mu2: float | None = None,
                        c: float | None = None, grid: int = DEFAULT_GRID,
                        delta: float | None = None):
    """Limit of the rescaled parking bridge.

    ``alpha = 2``: a scaled Brownian bridge on ``grid`` points.  ``alpha < 2``:
    an exact jump path whose atom intensity ``alpha (c/mu1) x**(-1-alpha)``
    already carries the scale.
    """
    scale = limit_scale(alpha, mu1, mu2, c)
    if alpha == 2:
        return GridPath(scale * brownian_bridge(grid, seed).values)
    if delta is None:
        raise ValueError("alpha < 2 needs a truncation delta")
    return stable_loop_path(alpha, c, mu1, delta, seed)


def _grid_vervaat(path: GridPath) -> np.ndarray:
    v = path.values
    G = path.grid_size
    k = int(np.argmin(v[:G]))
    out = np.concatenate((v[k:G], v[:k + 1] + (v[G] - v[0]))) - v[k]
    return out


def excursion_with_drift(path, t: float):
    """Re-root ``path`` at its minimum and subtract the drift ``t x``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if isinstance(path, GridPath):
        e = _grid_vervaat(path)
        return GridPath(e - t * path.grid)
    e = vervaat(path)
    return JumpDriftPath(e.slope - t, e.locations, e.sizes)


def _grid_flat_runs(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    G = len(values) - 1
    run_min = np.minimum.accumulate(values)
    flat = run_min[1:] == run_min[:-1]
    cuts = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], cuts, [G]))
    keep = flat[bounds[:-1]]
    return bounds[:-1][keep] / G, np.diff(bounds)[keep] / G


def fragment_intervals(path, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Constancy intervals of the running infimum of the drifted excursion.

    Positions are measured from the minimum of ``path``.
    """
    e = excursion_with_drift(path, t)
    if isinstance(e, GridPath):
        return _grid_flat_runs(e.values)
    return _constancy_runs(e.locations, e.sizes, -e.slope)


def fragmentation(path, t: float) -> np.ndarray:
    return ranked(fragment_intervals(path, t)[1])


def fragmentations(path, ts) -> list[np.ndarray]:
    """``fragmentation`` at several times, re-rooting the path only once."""
    ts = list(ts)
    if any(t < 0 for t in ts):
        raise ValueError("t must be nonnegative")
    if isinstance(path, GridPath):
        e = _grid_vervaat(path)
        x = path.grid
        return [ranked(_grid_flat_runs(e - t * x)[1]) for t in ts]
    e = vervaat(path)
    drift = -e.slope
    return [ranked(_constancy_runs(e.locations, e.sizes, drift + t)[1]) for t in ts]


def extreme_bridge(theta: ThetaSequence, G: int, seed, locations=None) -> GridPath:
    """``theta0 * Brownian bridge + sum_i theta_i (1{x >= U_i} - x)`` on the grid ``k/G``.

    The Brownian part and the uniforms use separate child streams of ``seed``.
    """
    ss = as_seedseq(seed)
    x = np.arange(G + 1) / G
    atoms = theta.atoms
    if locations is None:
        locations = np.random.default_rng(derive_seed(ss, 0)).random(len(atoms))
    locations = np.asarray(locations, dtype=float)
    first = np.searchsorted(x, locations, side="left")
    steps = np.bincount(first, weights=atoms, minlength=G + 1)
    v = np.cumsum(steps) - x * float(np.sum(atoms))
    if theta.theta0 > 0:
        v = v + theta.theta0 * brownian_bridge(G, derive_seed(ss, 1)).values
    v[0] = 0.0
    v[-1] = 0.0
    return GridPath(v)


class MergeStep(NamedTuple):
    partition: np.ndarray
    waiting_time: float
    pair: tuple[int, int]


def merge_dynamics_step(partition, seed) -> MergeStep:
    """One jump of the additive coalescent: pair ``(i, j)`` merges at rate ``s_i + s_j``.

    ``pair`` indexes the ranked input.
    """
    s = ranked(partition)
    k = len(s)
    if k < 2:
        raise ValueError("nothing to merge")
    rng = as_rng(seed)
    i, j = np.triu_indices(k, 1)
    rates = s[i] + s[j]
    total = (k - 1) * float(np.sum(s))
    wait = rng.exponential(1.0 / total)
    pick = int(rng.choice(len(rates), p=rates / rates.sum()))
    a, b = int(i[pick]), int(j[pick])
    merged = np.append(np.delete(s, [a, b]), s[a] + s[b])
    return MergeStep(ranked(merged), float(wait), (a, b))
