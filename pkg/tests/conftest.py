from __future__ import annotations

import numpy as np
import pytest

from lbcluster.graph import complete_graph, disjoint_union, make_clustered_regular


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def two_triangles():
    return disjoint_union(complete_graph(3), complete_graph(3))


@pytest.fixture(scope="session")
def clustered_small():
    """n=50, k=2, d=6 clustered regular graph with its planted partition."""
    return make_clustered_regular(50, 2, 6, 2, np.random.default_rng(7))


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
