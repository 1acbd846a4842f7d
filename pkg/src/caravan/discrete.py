"""Caravan parking on the cycle Z/nZ and its embedding in the continuous model."""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .model import CaravanInstance
from .parking import run_parking
from .samplers import CaravanLaw, _draw_to_budget, as_rng


@dataclass(frozen=True, eq=False)
class DiscreteTrajectory:
    """``owner[x]`` is the step (1-based) at which spot ``x`` filled, 0 if never.

    ``partitions[i]`` are the ranked circular block sizes after ``i`` caravans.
    """

    n: int
    owner: np.ndarray
    partitions: tuple[tuple[int, ...], ...]

    def occupied(self, i: int) -> np.ndarray:
        return np.flatnonzero((self.owner > 0) & (self.owner <= i))

    def rows(self):
        for step, part in enumerate(self.partitions):
            for rank, size in enumerate(part, start=1):
                yield step, rank, size


def _check(n: int, caravans) -> list[tuple[int, int]]:
    out = [(int(k), int(x) % n) for k, x in caravans]
    if any(k < 1 for k, _ in out):
        raise ValueError("caravan sizes must be positive integers")
    if sum(k for k, _ in out) > n:
        raise ValueError("capacity exceeded")
    return out


def knuth_park(n: int, caravans) -> DiscreteTrajectory:
    """Linear probing with caravans, via next-free pointers and a block union-find."""
    caravans = _check(n, caravans)
    nxt = list(range(n))  # nxt[x] leads towards the first free spot at or after x
    parent = list(range(n))
    size = [0] * n
    owner = np.zeros(n, dtype=np.int64)
    blocks: Counter[int] = Counter()
    parts: list[tuple[int, ...]] = [()]

    def free_from(x: int) -> int:
        root = x
        while nxt[root] != root:
            root = nxt[root]
        while nxt[x] != root:
            nxt[x], x = root, nxt[x]
        return root

    def block(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def join(a: int, b: int) -> None:
        ra, rb = block(a), block(b)
        if ra == rb:
            return
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        blocks[size[ra]] -= 1
        blocks[size[rb]] -= 1
        parent[rb] = ra
        size[ra] += size[rb]
        blocks[size[ra]] += 1

    for step, (k, spot) in enumerate(caravans, start=1):
        x = spot
        for _ in range(k):
            x = free_from(x)
            owner[x] = step
            nxt[x] = (x + 1) % n
            size[x] = 1
            blocks[1] += 1
            for y in ((x - 1) % n, (x + 1) % n):
                if owner[y] and y != x:
                    join(x, y)
            x = (x + 1) % n
        parts.append(tuple(sorted(blocks.elements(), reverse=True)))
    return DiscreteTrajectory(n, owner, tuple(parts))


def naive_park(n: int, caravans) -> DiscreteTrajectory:
    """Reference engine: scan spot by spot, recount blocks after each caravan."""
    caravans = _check(n, caravans)
    owner = np.zeros(n, dtype=np.int64)
    parts: list[tuple[int, ...]] = [()]
    for step, (k, spot) in enumerate(caravans, start=1):
        x = spot
        for _ in range(k):
            while owner[x]:
                x = (x + 1) % n
            owner[x] = step
        parts.append(circular_runs(owner > 0))
    return DiscreteTrajectory(n, owner, tuple(parts))


def circular_runs(occ: np.ndarray) -> tuple[int, ...]:
    """Ranked lengths of the maximal runs of True on a cycle."""
    n = len(occ)
    if occ.all():
        return (n,)
    if not occ.any():
        return ()
    start = int(np.flatnonzero(~occ)[0])
    rolled = np.roll(occ, -start)
    runs, cur = [], 0
    for v in rolled:
        if v:
            cur += 1
        elif cur:
            runs.append(cur)
            cur = 0
    if cur:
        runs.append(cur)
    return tuple(sorted(runs, reverse=True))


@dataclass(frozen=True)
class EquivReport:
    n: int
    steps: int
    max_discrepancy: float
    passed: bool


def discrete_instance(n: int, law: CaravanLaw, seed) -> list[tuple[int, int]]:
    """Integer caravans cut to total ``n`` and spots ``floor(n U)``."""
    if not law.integer_valued:
        raise ValueError("law must be integer valued")
    rng = as_rng(seed)
    sizes = _draw_to_budget(law, float(n), rng)
    spots = np.floor(n * rng.random(len(sizes))).astype(np.int64)
    return [(int(round(k)), int(x)) for k, x in zip(sizes, spots)]


def discrete_continuous_equiv(n: int, law: CaravanLaw, seed, caravans=None) -> EquivReport:
    """Run both models on the same data and compare block partitions at every step."""
    caravans = discrete_instance(n, law, seed) if caravans is None else _check(n, caravans)
    disc = knuth_park(n, caravans)
    inst = CaravanInstance([k / n for k, _ in caravans], [x / n for _, x in caravans])
    cont = run_parking(inst).partitions
    worst = 0.0
    for a, b in zip(disc.partitions, cont):
        a = np.array(a, dtype=float) / n
        if len(a) != len(b):
            worst = math.inf
            break
        if len(a):
            worst = max(worst, float(np.max(np.abs(a - b))))
    return EquivReport(n, len(caravans), worst, worst <= 1e-12)


def write_blocks_csv(trajectory: DiscreteTrajectory, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["step", "block_rank", "block_size"])
    w.writerows(trajectory.rows())
