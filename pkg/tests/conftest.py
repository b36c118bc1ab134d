import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from mmlab.builders import two_point
from mmlab.heat import SpectralSemigroup
from mmlab.space import random_space

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def t2():
    return two_point()


@pytest.fixture
def t2_sg(t2):
    return SpectralSemigroup.of(t2)


@st.composite
def spaces(draw, min_n=2, max_n=8, connected=True):
    """Random spaces built from a drawn seed (keeps shrinking meaningful)."""
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**31 - 1))
    return random_space(np.random.default_rng(seed), n, connected=connected)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
