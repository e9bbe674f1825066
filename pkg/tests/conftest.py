import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from grouptest.core import PoolDesign

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@st.composite
def designs(draw, max_n=8, max_m=6, allow_empty=True):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    min_size = 0 if allow_empty else 1
    pools = [draw(st.sets(st.integers(0, n - 1), min_size=min_size, max_size=n)) for _ in range(m)]
    return PoolDesign(n, [sorted(p) for p in pools])


@st.composite
def design_and_assignment(draw, max_n=8, max_m=6):
    d = draw(designs(max_n, max_m))
    x = draw(st.lists(st.integers(0, 1), min_size=d.n_variables, max_size=d.n_variables))
    return d, np.array(x, dtype=np.uint8)


@pytest.fixture
def path_design():
    return PoolDesign(3, [[0, 1], [1, 2]])


@pytest.fixture
def twin_design():
    return PoolDesign(2, [[0, 1], [0, 1]])
