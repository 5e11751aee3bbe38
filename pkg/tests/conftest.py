import math

import numpy as np
import pytest

from qtda.ingest import PointCloud, pairwise_distances, scale_grid
from qtda.simplicial import FiltrationContext

SQRT2 = math.sqrt(2.0)
SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def context_for(points) -> FiltrationContext:
    return FiltrationContext(pairwise_distances(PointCloud(np.asarray(points, dtype=float))))


@pytest.fixture
def square():
    return context_for(SQUARE)


@pytest.fixture
def two_triangles():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    return context_for(np.vstack([tri, tri + [10.0, 0.0]]))


def random_corpus(count=200, seed=20240601, n_range=(3, 10), n_scales=4):
    """Random clouds in the unit cube with their uniform scale grids.

    Yields (index, context, scales); the draw sequence does not depend on filtering.
    """
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        d = int(rng.choice([2, 3]))
        pts = rng.uniform(size=(n, d))
        dm = pairwise_distances(PointCloud(pts))
        yield i, FiltrationContext(dm), scale_grid(dm, n_scales).scales


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record a one-line verdict for the terminal summary."""

    def record(name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
