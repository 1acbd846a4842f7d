"""Stick-breaking trees driven by cutpoints and joinpoints, and first-branch laws.

A ``ThetaSequence`` drives two kinds of points on the half line: pairs
``(U, V)`` with ``U`` of intensity ``theta0**2 x dx`` and ``V`` uniform below
``U``, and for each atom a Poisson process of rate ``theta_i``.  Cutpoints are
all ``U`` and every point of an atom process after its first; a cutpoint's
joinpoint is its ``V`` or the first point of its atom process.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammainc

from .model import ThetaSequence
from .samplers import as_rng


@dataclass(frozen=True, eq=False)
class IcrtEventSet:
    theta: ThetaSequence
    horizon: float
    u: np.ndarray
    v: np.ndarray
    xi: tuple[np.ndarray, ...]

    def cut_join(self) -> tuple[np.ndarray, np.ndarray]:
        """Cutpoints in increasing order with their joinpoints."""
        cuts = [self.u]
        joins = [self.v]
        for pts in self.xi:
            if len(pts) >= 2:
                cuts.append(pts[1:])
                joins.append(np.full(len(pts) - 1, pts[0]))
        c = np.concatenate(cuts)
        j = np.concatenate(joins)
        order = np.argsort(c, kind="stable")
        return c[order], j[order]


def sample_events(theta: ThetaSequence, horizon: float, seed) -> IcrtEventSet:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    rng = as_rng(seed)
    n = rng.poisson(theta.theta0**2 * horizon**2 / 2)
    # the density of U given the count is proportional to x on (0, L]
    u = np.sort(horizon * np.sqrt(rng.random(n)))
    v = u * rng.random(n)
    xi = tuple(np.sort(rng.uniform(0.0, horizon, rng.poisson(th * horizon))) for th in theta.atoms)
    return IcrtEventSet(theta, float(horizon), u, v, xi)


def eta_k(events: IcrtEventSet, k: int) -> float:
    cuts, _ = events.cut_join()
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(cuts) < k:
        raise ValueError("horizon too short")
    return float(cuts[k - 1])


@dataclass(frozen=True, eq=False)
class IcrtReducedTree:
    """Branch ``j`` is ``(eta[j-2], eta[j-1]]`` (branch 1 starts at the root 0).

    Branch ``j + 1`` hangs from the point at position ``joins[j - 1]``.
    Tree points are named by their position on the line.
    """

    eta: np.ndarray
    joins: np.ndarray

    @property
    def k(self) -> int:
        return len(self.eta)

    @property
    def total_length(self) -> float:
        return float(self.eta[-1])

    def branch_of(self, x: float) -> int:
        if not 0 <= x <= self.eta[-1]:
            raise ValueError("point outside the tree")
        return int(np.searchsorted(self.eta, x, side="left")) + 1

    def distance(self, x: float, y: float) -> float:
        bx, by = self.branch_of(x), self.branch_of(y)
        acc = 0.0
        while bx != by:
            if bx > by:
                acc += x - self.eta[bx - 2]
                x = float(self.joins[bx - 2])
                bx = self.branch_of(x)
            else:
                acc += y - self.eta[by - 2]
                y = float(self.joins[by - 2])
                by = self.branch_of(y)
        return acc + abs(x - y)


def build_reduced_tree(events: IcrtEventSet, k: int) -> IcrtReducedTree:
    cuts, joins = events.cut_join()
    if len(cuts) < k:
        raise ValueError("horizon too short")
    return IcrtReducedTree(cuts[:k].copy(), joins[: k - 1].copy())


def eta1_survival(theta: ThetaSequence, r):
    """``P(eta_1 > r)`` for finitely many atoms."""
    r = np.asarray(r, dtype=float)
    a = theta.atoms.reshape((-1,) + (1,) * r.ndim)
    log_s = -0.5 * theta.theta0**2 * r**2 + np.sum(np.log1p(a * r) - a * r, axis=0)
    out = np.exp(log_s)
    return out if out.ndim else float(out)


def event_horizon(theta: ThetaSequence, tail: float = 1e-12) -> float:
    """A horizon beyond which ``eta_1`` falls with probability at most ``tail``."""
    L = 1.0
    while eta1_survival(theta, L) > tail:
        L *= 2
    return L


def sample_eta1(theta: ThetaSequence, n: int, seed) -> np.ndarray:
    """``n`` draws of ``eta_1`` without scanning a horizon.

    The first ``U`` lies beyond ``r`` with probability ``exp(-theta0**2 r**2 / 2)``
    and the second point of atom ``i`` is Gamma(2, 1/theta_i).
    """
    rng = as_rng(seed)
    out = np.full(n, np.inf)
    if theta.theta0 > 0:
        out = np.sqrt(2 * rng.exponential(1.0, n)) / theta.theta0
    for a in theta.atoms:
        out = np.minimum(out, rng.gamma(2.0, 1.0 / a, n))
    return out


def weibull_survival(alpha: float, r):
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    out = np.exp(-(alpha - 1) * np.asarray(r, dtype=float) ** alpha)
    return out if out.ndim else float(out)


def atom_rate(alpha: float) -> float:
    """``K`` such that the atom intensity is ``alpha K x**(-1-alpha) dx``: ``(alpha-1)/Gamma(2-alpha)``."""
    return (alpha - 1) / math.gamma(2 - alpha)


def small_atom_exponent(alpha: float, r, delta: float):
    """``-log E prod_{D < delta} (1 + r D) exp(-r D)`` over the atoms below ``delta``."""
    r = np.asarray(r, dtype=float)
    y = r * delta
    s = 2 - alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        lower_s = gammainc(s, y) * math.gamma(s)
        lower_2 = -np.expm1(-y) - y * np.exp(-y)
        out = atom_rate(alpha) * r**alpha * (lower_s - y ** (-alpha) * lower_2)
    out = np.where(r > 0, out, 0.0)
    return out if out.ndim else float(out)


def _atom_batches(alpha: float, delta: float, n: int, rng: np.random.Generator):
    """Atoms above ``delta`` for ``n`` independent replicas, flattened, with replica ids."""
    rate = atom_rate(alpha)
    mean = rate * delta ** (-alpha)
    counts = rng.poisson(mean, n)
    ids = np.repeat(np.arange(n), counts)
    atoms = (rate / rng.uniform(0.0, mean, len(ids))) ** (1 / alpha)
    return ids, atoms


def weibull_identity_mc(alpha: float, r, n: int, seed, delta: float = 0.01) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of ``prod (1 + r D) exp(-r D)`` over the atom measure.

    Atoms above ``delta`` are simulated; the atoms below contribute their exact
    expected factor ``exp(-small_atom_exponent)``, so there is no truncation bias.
    """
    rng = as_rng(seed)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    ids, atoms = _atom_batches(alpha, delta, n, rng)
    means, ses = [], []
    for rr in r:
        logp = np.bincount(ids, weights=np.log1p(rr * atoms) - rr * atoms, minlength=n)
        vals = np.exp(logp - small_atom_exponent(alpha, rr, delta))
        means.append(vals.mean())
        ses.append(vals.std(ddof=1) / math.sqrt(n))
    return np.array(means), np.array(ses)


def _invert_small_exponent(alpha: float, delta: float, target: np.ndarray) -> np.ndarray:
    lo = np.full(target.shape, -25.0)
    hi = np.full(target.shape, 25.0)
    for _ in range(56):
        mid = 0.5 * (lo + hi)
        below = small_atom_exponent(alpha, np.exp(mid), delta) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.exp(0.5 * (lo + hi))


def sample_size_biased_distance(alpha: float, n: int, seed, delta: float = 0.01,
                                batch: int = 20_000) -> np.ndarray:
    """Draws of the first branch length mixed over the atom measure.

    Atoms above ``delta`` act as rates directly; the small atoms are folded
    into one independent variable with survival ``exp(-small_atom_exponent)``.
    """
    rng = as_rng(seed)
    out = np.empty(n)
    for start in range(0, n, batch):
        m = min(batch, n - start)
        ids, atoms = _atom_batches(alpha, delta, m, rng)
        second = rng.gamma(2.0, 1.0, len(atoms)) / atoms
        big = np.full(m, np.inf)
        np.minimum.at(big, ids, second)
        small = _invert_small_exponent(alpha, delta, rng.exponential(1.0, m))
        out[start:start + m] = np.minimum(big, small)
    return out


def size_biased_moment_mc(alpha: float, t: float, replicas: int, seed, delta: float = 0.01) -> tuple[float, float]:
    """Monte Carlo ``E exp(-t eta)``; returns (estimate, standard error)."""
    if t == 0:
        return 1.0, 0.0
    vals = np.exp(-t * sample_size_biased_distance(alpha, replicas, seed, delta))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(replicas))


def size_biased_moment_quadrature(alpha: float, t: float) -> float:
    """``int_0^inf alpha (alpha-1) r**(alpha-1) exp(-t r - (alpha-1) r**alpha) dr``.

    Computed in the variable ``u = (alpha-1) r**alpha``, where the integrand
    is smooth and bounded by ``exp(-u)``.
    """
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 1.0
    val, _ = integrate.quad(
        lambda u: math.exp(-u - t * (u / (alpha - 1)) ** (1 / alpha)),
        0.0, math.inf, epsabs=1e-11, epsrel=1e-11, limit=200,
    )
    return val


def size_biased_moment_midpoint(alpha: float, t: float, fine: int = 1_000_000, coarse: int = 4_000_000,
                                split: float = 1.0, upper: float = 80.0) -> float:
    """Midpoint rule for the same integral in the original variable ``r``.

    A finer step on ``[0, split]`` handles the ``r**(alpha-1)`` cusp at 0.
    """
    def piece(a, b, n):
        h = (b - a) / n
        r = a + h * (np.arange(n) + 0.5)
        f = alpha * (alpha - 1) * r ** (alpha - 1) * np.exp(-t * r - (alpha - 1) * r**alpha)
        return h * math.fsum(f)

    return piece(0.0, split, fine) + piece(split, upper, coarse)
