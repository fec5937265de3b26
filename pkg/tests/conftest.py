import numpy as np
import pytest

from hsfem.mesh import Mesh, build_rect_mesh

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def unit_square():
    return build_rect_mesh(0.0, 1.0, 0.0, 1.0, 1, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def equilateral_mesh(nx=4, ny=4):
    """Acute triangulation of a parallelogram patch (all angles 60 degrees)."""
    s3 = np.sqrt(3.0) / 2
    nodes = np.array([[i + 0.5 * j, s3 * j] for j in range(ny + 1) for i in range(nx + 1)])
    el = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b, c, d = a + 1, a + nx + 1, a + nx + 2
            el += [(a, b, c), (b, d, c)]
    return Mesh(nodes, np.array(el))


def obtuse_mesh():
    """Two triangles sharing an edge, one with a 126.9 degree angle."""
    nodes = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 0.5], [1.0, -1.0]])
    return Mesh(nodes, np.array([[0, 1, 2], [0, 3, 1]]))
