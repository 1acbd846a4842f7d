"""Monte Carlo harness: KS distances, mean and standard error, convergence experiments.

Experiments compare the parking side with the limit side through the two
largest block masses.  The parking side reads blocks off the bridge
constancy intervals, which equal the parked blocks exactly and cost one sort
per replica instead of a full parking run.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

from .bridge import build_bridge, constancy_blocks, path_argmin
from .limit import extreme_bridge, fragmentations, scaled_limit_bridge
from .model import CaravanInstance, ThetaSequence
from .parking import backward_index
from .samplers import CaravanLaw, as_rng, derive_seed, make_instance, practical_delta

RANKS = (1, 2)
KS_THRESHOLD = 0.05


def ks_statistic(sample_a, sample_b) -> float:
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample")
    # only the statistic is used; the p-value path can divide by zero on tiny samples
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(sps.ks_2samp(a, b, method="asymp").statistic)


def mc_mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float).ravel()
    if len(v) < 2:
        raise ValueError("need at least two values")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def run_replicas(fn: Callable[[int], object], replicas: int, threads: int = 1) -> list:
    """``[fn(0), ..., fn(replicas-1)]``, in that order whatever ``threads`` is."""
    if threads <= 1:
        return [fn(k) for k in range(replicas)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(replicas)))


def top_masses(partition, ranks=RANKS) -> np.ndarray:
    out = np.zeros(len(ranks))
    for j, r in enumerate(ranks):
        if r <= len(partition):
            out[j] = partition[r - 1]
    return out


# --- drift of the last caravans ---------------------------------------------


def drift_deviation(instance: CaravanInstance, eps: float, alpha: float, t: float, mu1: float,
                    clamp: bool = False) -> float:
    """Sup norm of (rescaled last-caravans step function) minus ``t mu1 x``, exact.

    With ``clamp`` a window longer than the instance uses every caravan.
    """
    k = instance.m - backward_index(instance.m, eps, alpha, t)
    if k <= 0:
        return 0.0
    if k > instance.m:
        if not clamp:
            raise ValueError("time beyond process start")
        k = instance.m
    w = instance.masses[-k:] * eps ** (1 / alpha - 1)
    u = instance.arrival_points[-k:]
    order = np.argsort(u)
    u, w = u[order], w[order]
    right = np.cumsum(w)
    left = right - w
    target = t * mu1 * u
    dev = max(np.max(np.abs(right - target)), np.max(np.abs(left - target)), abs(right[-1] - t * mu1))
    return float(dev)


@dataclass(frozen=True)
class DriftReport:
    eps: float
    t: float
    median: float
    deviations: np.ndarray


def drift_check(law: CaravanLaw, alpha: float, t: float, eps: float, seed,
                replicas: int = 200, threads: int = 1) -> DriftReport:
    def one(k):
        inst = make_instance(law, eps, derive_seed(seed, 0, k))
        return drift_deviation(inst, eps, alpha, t, law.mu1, clamp=True)

    devs = np.array(run_replicas(one, replicas, threads))
    return DriftReport(eps, t, float(np.median(devs)), devs)


# --- backward marginals against the limit ------------------------------------


def backward_partitions(instance: CaravanInstance, eps: float, alpha: float, ts) -> list[np.ndarray]:
    """Block masses after ``m - floor(t eps**(-1/alpha))`` caravans, for each ``t``.

    Times before the first caravan give the empty lot, so heavy-tailed
    instances with few caravans still yield a sample.
    """
    origin, _ = path_argmin(build_bridge(instance, instance.m))
    out = []
    for t in ts:
        i = max(backward_index(instance.m, eps, alpha, t), 0)
        out.append(np.zeros(0) if i == 0 else constancy_blocks(build_bridge(instance, i), origin))
    return out


def parking_samples(law: CaravanLaw, alpha: float, ts, eps: float, replicas: int, seed,
                    threads: int = 1) -> np.ndarray:
    """Array ``[replica, t, rank]`` of the largest masses; replica ``k`` uses the same seed for every ``eps``."""
    def one(k):
        inst = make_instance(law, eps, derive_seed(seed, 0, k))
        return [top_masses(p) for p in backward_partitions(inst, eps, alpha, ts)]

    return np.array(run_replicas(one, replicas, threads))


def limit_delta(law: CaravanLaw, max_atoms: float = 2e5) -> float:
    return practical_delta(law.index, law.tail_constant, law.mu1, max_atoms)


def limit_samples(law: CaravanLaw, ts, replicas: int, seed, grid: int = 2**20,
                  delta: float | None = None, threads: int = 1) -> np.ndarray:
    """Array ``[replica, t, rank]`` of the largest fragments of the limit at times ``mu1 t``."""
    alpha = law.index
    if alpha < 2 and delta is None:
        delta = limit_delta(law)
    times = [law.mu1 * t for t in ts]

    def one(k):
        path = scaled_limit_bridge(alpha, derive_seed(seed, 1, k), mu1=law.mu1, mu2=law.mu2,
                                   c=law.tail_constant, grid=grid, delta=delta)
        return [top_masses(f) for f in fragmentations(path, times)]

    return np.array(run_replicas(one, replicas, threads))


def _ks_entries(a: np.ndarray, b: np.ndarray, ts) -> list[dict]:
    out = []
    for j, t in enumerate(ts):
        for r_idx, r in enumerate(RANKS):
            out.append({"t": t, "rank": r, "value": ks_statistic(a[:, j, r_idx], b[:, j, r_idx])})
    return out


def _verdict(entries: list[dict], threshold: float) -> bool:
    return all(e["value"] <= threshold for e in entries if e["rank"] == 1)


def convergence_experiment(law: CaravanLaw, alpha: float, t_list: Sequence[float], eps: float,
                           replicas: int, seed, *, grid: int = 2**20, delta: float | None = None,
                           threads: int = 1, threshold: float = KS_THRESHOLD,
                           limit: np.ndarray | None = None) -> dict:
    """KS distance between backward parking marginals and limit fragments, per ``t`` and rank.

    ``limit`` may carry precomputed limit samples (from ``limit_samples``).
    """
    if abs(alpha - law.index) > 1e-12:
        raise ValueError("alpha does not match the law")
    ts = list(t_list)
    if limit is None:
        limit = limit_samples(law, ts, replicas, seed, grid, delta, threads)
    park = parking_samples(law, alpha, ts, eps, replicas, seed, threads)
    entries = _ks_entries(park, limit, ts)
    return {
        "experiment": "convergence",
        "params": {"law": law.to_dict(), "alpha": alpha, "t": ts, "eps": eps, "replicas": replicas,
                   "grid": grid if alpha == 2 else None,
                   "delta": None if alpha == 2 else (delta if delta is not None else limit_delta(law)),
                   "threshold": threshold},
        "ks": entries,
        "pass": _verdict(entries, threshold),
    }


def convergence_trend(law: CaravanLaw, alpha: float, t_list, eps_list, replicas: int, seed, *,
                      grid: int = 2**20, delta: float | None = None, threads: int = 1,
                      threshold: float = KS_THRESHOLD) -> list[dict]:
    """``convergence_experiment`` at each ``eps`` against one shared set of limit samples."""
    ts = list(t_list)
    limit = limit_samples(law, ts, replicas, seed, grid, delta, threads)
    return [convergence_experiment(law, alpha, ts, eps, replicas, seed, grid=grid, delta=delta,
                                   threads=threads, threshold=threshold, limit=limit)
            for eps in eps_list]


def decreasing(values) -> bool:
    """True when every value is strictly below the one before it."""
    v = list(values)
    return all(b < a for a, b in zip(v, v[1:]))


def trend_by_t(reports: list[dict], rank: int = 1) -> dict:
    """Per ``t``, the KS values of ``rank`` across ``reports`` (in report order) and whether they decrease."""
    out = {}
    for t in reports[0]["params"]["t"]:
        vals = [e["value"] for r in reports for e in r["ks"] if e["t"] == t and e["rank"] == rank]
        out[t] = {"values": vals, "decreasing": decreasing(vals)}
    return out


# --- extreme coalescents ----------------------------------------------------------


def sigma(masses) -> float:
    p = np.asarray(masses, dtype=float)
    return math.sqrt(math.fsum(p * p))


def extreme_index(masses_in_order, t: float) -> int:
    """Smallest ``i >= 0`` with ``sum_{j > i} p_j <= t sigma(p)``."""
    p = np.asarray(masses_in_order, dtype=float)
    tails = np.concatenate((np.cumsum(p[::-1])[::-1], [0.0]))
    limit = t * sigma(p) * (1 + 1e-12)
    return int(np.flatnonzero(tails <= limit)[0])


def extreme_partition(masses, t: float, seed) -> np.ndarray:
    """Block masses at index ``extreme_index`` for a uniformly permuted order of ``masses``."""
    rng = as_rng(seed)
    p = np.asarray(masses, dtype=float)
    order = rng.permutation(len(p))
    inst = CaravanInstance(p[order], rng.random(len(p)))
    i = extreme_index(inst.masses, t)
    if i == 0:
        return np.zeros(0)
    origin, _ = path_argmin(build_bridge(inst, inst.m))
    return constancy_blocks(build_bridge(inst, i), origin)


def extreme_convergence_experiment(p_family, theta: ThetaSequence, t: float, replicas: int, seed, *,
                                   grid: int = 2**20, threads: int = 1,
                                   threshold: float = KS_THRESHOLD) -> dict:
    """KS of the largest masses of permuted parking against the extreme-bridge fragments."""
    family = [np.asarray(p, dtype=float) for p in p_family]

    def lim(k):
        path = extreme_bridge(theta, grid, derive_seed(seed, 1, k))
        return [top_masses(fragmentations(path, [t])[0])]

    limit = np.array(run_replicas(lim, replicas, threads))
    entries = []
    for n_idx, p in enumerate(family):
        park = np.array(run_replicas(
            lambda k: [top_masses(extreme_partition(p, t, derive_seed(seed, 0, n_idx, k)))],
            replicas, threads))
        for e in _ks_entries(park, limit, [t]):
            e["n"] = len(p)
            entries.append(e)
    return {
        "experiment": "extreme",
        "params": {"t": t, "replicas": replicas, "grid": grid, "theta0": theta.theta0,
                   "atoms": theta.atoms.tolist(), "sizes": [len(p) for p in family],
                   "threshold": threshold},
        "ks": entries,
        "pass": _verdict(entries, threshold),
    }
