"""Seeded random ingredients: caravan lengths, arrivals, bridges, stable laws, atoms.

Every sampler takes ``seed``, which may be an int, a ``SeedSequence`` or a
``Generator``; identical seeds give identical draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterable

import numpy as np

from .model import CaravanInstance, GridPath, ThetaSequence

FAMILIES = ("pareto", "exponential", "deterministic", "geometric")

# positional order of parameters in the "family:a,b" form
_POSITIONAL = {
    "pareto": ("alpha", "xm"),
    "exponential": ("rate",),
    "deterministic": ("value",),
    "geometric": ("q",),
}

ATOM_CAP = 10_000_000


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2**63)))
    return np.random.SeedSequence(seed)


def derive_seed(seed, *keys: int) -> np.random.SeedSequence:
    """Counter-style child seed: the same ``(seed, keys)`` always gives the same stream."""
    ss = as_seedseq(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in keys))


@dataclass(frozen=True)
class CaravanLaw:
    """Law of a caravan length.

    pareto: ``P(l > x) = (x / xm)**-alpha`` for ``x >= xm``, with ``1 < alpha < 2``.
    exponential: rate ``rate``.  deterministic: always ``value``.
    geometric: ``P(l = k) = q (1 - q)**(k - 1)`` on ``k = 1, 2, ...``.
    """

    family: str
    alpha: float = 1.5
    xm: float = 1.0
    rate: float = 1.0
    value: float = 1.0
    q: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown law family {self.family!r}")
        if self.family == "pareto" and not (1 < self.alpha < 2 and self.xm > 0):
            raise ValueError("pareto needs 1 < alpha < 2 and xm > 0")
        if self.family == "exponential" and not self.rate > 0:
            raise ValueError("exponential rate must be positive")
        if self.family == "deterministic" and not self.value > 0:
            raise ValueError("deterministic value must be positive")
        if self.family == "geometric" and not 0 < self.q <= 1:
            raise ValueError("geometric q must lie in (0, 1]")

    @classmethod
    def parse(cls, text: str) -> CaravanLaw:
        """Read ``"pareto:1.5,1"``, ``"pareto:alpha=1.5,xm=1"`` or ``"deterministic:1"``."""
        family, _, rest = text.strip().partition(":")
        family = family.strip().lower()
        if family not in FAMILIES:
            raise ValueError(f"unknown law family {family!r}")
        kw: dict[str, float] = {}
        names = _POSITIONAL[family]
        for k, item in enumerate(filter(None, (t.strip() for t in rest.split(",")))):
            if "=" in item:
                key, val = item.split("=", 1)
                kw[key.strip()] = float(val)
            elif k < len(names):
                kw[names[k]] = float(item)
            else:
                raise ValueError(f"too many parameters for {family}")
        return cls.from_dict({"family": family, **kw})

    @classmethod
    def from_dict(cls, d: dict) -> CaravanLaw:
        allowed = {f.name for f in fields(cls)}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown law parameters {sorted(unknown)}")
        return cls(**{k: (v if k == "family" else float(v)) for k, v in d.items()})

    def to_dict(self) -> dict:
        out: dict = {"family": self.family}
        for name in _POSITIONAL[self.family]:
            out[name] = getattr(self, name)
        return out

    @property
    def index(self) -> float:
        """Stable index of the domain of attraction (2 for finite variance)."""
        return self.alpha if self.family == "pareto" else 2.0

    @property
    def mu1(self) -> float:
        if self.family == "pareto":
            return self.alpha * self.xm / (self.alpha - 1)
        if self.family == "exponential":
            return 1.0 / self.rate
        if self.family == "deterministic":
            return self.value
        return 1.0 / self.q

    @property
    def mu2(self) -> float:
        if self.family == "pareto":
            return math.inf
        if self.family == "exponential":
            return 2.0 / self.rate**2
        if self.family == "deterministic":
            return self.value**2
        return (2.0 - self.q) / self.q**2

    @property
    def tail_constant(self) -> float | None:
        """``c`` with ``P(l > x) ~ c x**-alpha``; only for pareto."""
        return self.xm**self.alpha if self.family == "pareto" else None

    @property
    def integer_valued(self) -> bool:
        return self.family == "geometric" or (self.family == "deterministic" and float(self.value).is_integer())

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family == "pareto":
            # inverse transform; 1 - U avoids a zero base
            return self.xm * (1.0 - rng.random(n)) ** (-1.0 / self.alpha)
        if self.family == "exponential":
            return rng.exponential(1.0 / self.rate, n)
        if self.family == "deterministic":
            return np.full(n, float(self.value))
        return rng.geometric(self.q, n).astype(float)


def sample_lengths(law: CaravanLaw, n: int, seed) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    return law.draw(as_rng(seed), n)


def truncate_to_budget(lengths: Iterable[float], budget: float) -> tuple[np.ndarray, int]:
    """Cut a length stream at the first partial sum reaching ``budget``.

    The last kept length is shortened so the kept lengths sum to ``budget``.
    """
    if not budget > 0:
        raise ValueError("budget must be positive")
    kept: list[float] = []
    total = 0.0
    for x in lengths:
        x = float(x)
        if total + x >= budget:
            kept.append(budget - total)
            return np.array(kept), len(kept)
        kept.append(x)
        total += x
    raise ValueError("length stream ended before reaching the budget")


def budget_for(eps: float) -> float:
    """``1/eps``, snapped to the nearest integer when it is one up to rounding."""
    b = 1.0 / eps
    r = round(b)
    return float(r) if r > 0 and abs(b - r) <= 1e-9 * b else b


def _draw_to_budget(law: CaravanLaw, budget: float, rng: np.random.Generator) -> np.ndarray:
    chunk = int(budget / law.mu1 * 1.05) + 64
    parts: list[np.ndarray] = []
    total = 0.0
    while True:
        x = law.draw(rng, chunk)
        cs = total + np.cumsum(x)
        hit = np.flatnonzero(cs >= budget)
        if len(hit):
            T = int(hit[0])
            before = cs[T - 1] if T > 0 else total
            parts.append(x[:T])
            parts.append(np.array([budget - before]))
            return np.concatenate(parts)
        parts.append(x)
        total = float(cs[-1])


def make_instance(law: CaravanLaw, eps: float, seed) -> CaravanInstance:
    """Complete instance ``p_i = eps * l*_i`` with uniform arrivals.

    Lengths are drawn first, then the ``T`` arrival points, from one stream.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    rng = as_rng(seed)
    lengths = _draw_to_budget(law, budget_for(eps), rng)
    p = eps * lengths
    # close the budget exactly
    p[-1] = 1.0 - math.fsum(p[:-1])
    s = rng.random(len(p))
    return CaravanInstance(p, s)


def differential_suite(count: int, seed, max_m: int = 200) -> list[CaravanInstance]:
    """Random complete instances cycling through deterministic, exponential and pareto(1.5) lengths.

    Instance ``k`` has ``m`` uniform on ``1..max_m`` and its own child stream.
    """
    laws = (CaravanLaw("deterministic"), CaravanLaw("exponential"), CaravanLaw("pareto", alpha=1.5))
    out = []
    for k in range(count):
        rng = as_rng(derive_seed(seed, k))
        m = int(rng.integers(1, max_m + 1))
        lengths = laws[k % 3].draw(rng, m)
        p = lengths / lengths.sum()
        p[-1] = 1.0 - math.fsum(p[:-1])
        out.append(CaravanInstance(p, rng.random(m)))
    return out


def brownian_bridge(G: int, seed) -> GridPath:
    """Standard Brownian bridge on the grid ``k/G``.

    For ``G`` a power of two the grid values are built level by level from
    conditional midpoints, each level with its own stream, so the path at
    ``2G`` refines the path at ``G`` on the same seed.  Other ``G`` use a
    Gaussian walk tied down at 1.
    """
    if G < 2:
        raise ValueError("grid size must be at least 2")
    if G & (G - 1):
        rng = as_rng(seed)
        w = np.concatenate(([0.0], np.cumsum(rng.normal(0.0, math.sqrt(1.0 / G), G))))
        v = w - np.arange(G + 1) / G * w[-1]
        v[-1] = 0.0
        return GridPath(v)
    ss = as_seedseq(seed)
    v = np.zeros(2)
    level = 0
    while len(v) - 1 < G:
        level += 1
        n = len(v) - 1
        # midpoint of a bridge over a cell of width 1/n: variance 1/(4n)
        mid = 0.5 * (v[:-1] + v[1:]) + np.random.default_rng(derive_seed(ss, level)).normal(0.0, math.sqrt(0.25 / n), n)
        out = np.empty(2 * n + 1)
        out[0::2] = v
        out[1::2] = mid
        v = out
    return GridPath(v)


def stable_spectrally_positive(alpha: float, n: int, seed) -> np.ndarray:
    """Draws ``X`` with ``E exp(-lam X) = exp(lam**alpha)`` and no negative jumps.

    Chambers-Mallows-Stuck with skewness 1, rescaled by ``|cos(pi alpha/2)|**(1/alpha)``.
    """
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    rng = as_rng(seed)
    tan = math.tan(math.pi * alpha / 2)
    b = math.atan(tan) / alpha
    s = (1 + tan * tan) ** (1 / (2 * alpha))
    v = rng.uniform(-math.pi / 2, math.pi / 2, n)
    w = rng.exponential(1.0, n)
    x = (
        s
        * np.sin(alpha * (v + b))
        / np.cos(v) ** (1 / alpha)
        * (np.cos(v - alpha * (v + b)) / w) ** ((1 - alpha) / alpha)
    )
    return abs(math.cos(math.pi * alpha / 2)) ** (1 / alpha) * x


def default_delta(alpha: float, c: float, mu1: float) -> float:
    """Threshold whose neglected atoms carry total second moment at most 1e-6."""
    return (1e-6 * (2 - alpha) * mu1 / (alpha * c)) ** (1 / (2 - alpha))


def practical_delta(alpha: float, c: float, mu1: float, max_atoms: float = 1e5) -> float:
    """``default_delta`` raised so the expected atom count stays below ``max_atoms``."""
    return max(default_delta(alpha, c, mu1), (c / mu1 / max_atoms) ** (1 / alpha))


def neglected_variance(alpha: float, c: float, mu1: float, delta: float) -> float:
    """Second moment of the atoms below ``delta``."""
    return alpha * c / mu1 * delta ** (2 - alpha) / (2 - alpha)


def poisson_atoms(alpha: float, c: float, mu1: float, delta: float, seed, cap: float = ATOM_CAP) -> np.ndarray:
    """Decreasing atoms above ``delta`` of the Poisson measure ``alpha (c/mu1) x**(-1-alpha) dx``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    rate = c / mu1
    mean = rate * delta ** (-alpha)
    if mean > cap:
        raise ValueError("truncation too fine")
    rng = as_rng(seed)
    n = rng.poisson(mean)
    # arrival times of a unit Poisson process on (0, mean] mapped through the tail
    gam = np.sort(rng.uniform(0.0, mean, n))
    return (rate / gam) ** (1 / alpha)


def theta_star(atoms) -> tuple[float, ThetaSequence]:
    """``t*`` with ``exp(2 t*) = sum atoms**2`` and the normalized atoms."""
    a = -np.sort(-np.asarray(atoms, dtype=float))
    if len(a) == 0 or np.any(a <= 0):
        raise ValueError("atoms must be a nonempty positive sequence")
    norm = math.sqrt(math.fsum(a * a))
    return math.log(norm), ThetaSequence(0.0, a / norm, truncated=True)
