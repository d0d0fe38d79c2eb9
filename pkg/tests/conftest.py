import warnings

import numpy as np
import pytest

from vem_sad.mesh import generate_nonconvex_mesh, generate_voronoi_mesh
from vem_sad.polybasis import Element


@pytest.fixture(autouse=True)
def _quiet_parameter_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*outside the robust parameter range")
        yield


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line; all lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sample_elements():
    """A square, a skewed pentagon, a non-convex hexagon and a Voronoi cell."""
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    pentagon = np.array([[0.1, 0.0], [1.2, 0.2], [1.4, 0.9], [0.6, 1.5], [-0.2, 0.8]])
    nonconvex = generate_nonconvex_mesh(1).element_coords(0)
    voronoi = generate_voronoi_mesh(9, rng_seed=3, lloyd_iterations=5).element_coords(4)
    return [Element(xy) for xy in (square, pentagon, nonconvex, voronoi)]

