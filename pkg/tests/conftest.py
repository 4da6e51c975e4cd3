import numpy as np
import pytest
from hypothesis import settings, strategies as st

from cover_spectra.graph_core import random_graph

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def graph_from_seed(seed: int, max_vertices: int = 8, **kw):
    return random_graph(np.random.default_rng(seed), max_vertices, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
