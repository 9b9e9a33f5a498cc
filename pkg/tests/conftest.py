import numpy as np
import pytest
from hypothesis import settings, strategies as st

from bornlab.linalg import Ray
from bornlab.sampling import SeededRng, haar_unitary, random_basis, random_ray

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

SQ2 = np.sqrt(2.0)

dims = st.integers(min_value=2, max_value=6)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


@st.composite
def rays(draw, dim=None):
    d = draw(dims) if dim is None else dim
    return random_ray(d, SeededRng(draw(seeds)))


@st.composite
def scenarios(draw):
    """A random (psi, basis, unitary, outcome) at a shared dimension."""
    d = draw(dims)
    rng = SeededRng(draw(seeds))
    return random_ray(d, rng), random_basis(d, rng), haar_unitary(d, rng), draw(st.integers(0, d - 1))


def e(d, k):
    v = np.zeros(d, dtype=complex)
    v[k] = 1
    return v


def ray(*amps):
    return Ray.from_vector(np.array(amps, dtype=complex))


@pytest.fixture
def rng():
    return SeededRng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
