import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from udseq import fuzz

settings.register_profile(
    "default",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


def space_and_measures(seed, n_points, count, exact=False, k=None):
    rng = np.random.default_rng(seed)
    space = fuzz.random_space(rng, n_points)
    return space, [fuzz.random_measure(rng, space, k or int(rng.integers(1, n_points + 1)), exact) for _ in range(count)]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
