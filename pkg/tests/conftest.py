import math
import sys

import numpy as np
import pytest
from hypothesis import strategies as st

from caravan.model import CaravanInstance


def complete_instance(rng: np.random.Generator, m: int, law: str = "exponential") -> CaravanInstance:
    if law == "deterministic":
        lengths = np.ones(m)
    elif law == "pareto":
        lengths = (1.0 - rng.random(m)) ** (-1 / 1.5)
    else:
        lengths = rng.exponential(size=m)
    p = lengths / lengths.sum()
    p[-1] = 1.0 - math.fsum(p[:-1])
    return CaravanInstance(p, rng.random(m))


@st.composite
def instances(draw, max_m=40, complete=True):
    m = draw(st.integers(1, max_m))
    weights = draw(st.lists(st.floats(0.01, 10.0), min_size=m, max_size=m))
    # dyadic points: exact ties happen, near-coincidences below the tolerance do not
    points = draw(st.lists(st.integers(0, 2**30 - 1), min_size=m, max_size=m))
    p = np.array(weights) / sum(weights)
    if complete:
        p[-1] = 1.0 - math.fsum(p[:-1])
    else:
        p *= draw(st.floats(0.1, 1.0))
    return CaravanInstance(p, np.array(points) / 2**30)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
