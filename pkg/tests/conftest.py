import numpy as np
import pytest

from rmplate.mesh import Mesh, builtin_mesh


def single_triangle(tag="c"):
    V = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return Mesh(V, [[0, 1, 2]], [[0, 1], [1, 2], [2, 0]], [tag] * 3)


def two_element_square(tag="c"):
    V = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    B = [[0, 1], [1, 2], [2, 3], [3, 0]]
    return Mesh(V, [[0, 1, 2], [0, 2, 3]], B, [tag] * 4)


def structured_square(n, tag="c"):
    """Unit square split into 2 n^2 right triangles."""
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    V = np.column_stack([X.ravel(), Y.ravel()])
    idx = lambda i, j: j * (n + 1) + i  # noqa: E731
    T = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            T += [[a, b, c], [a, c, d]]
    B = []
    for i in range(n):
        B += [[idx(i, 0), idx(i + 1, 0)], [idx(n, i), idx(n, i + 1)]]
        B += [[idx(i + 1, n), idx(i, n)], [idx(0, i + 1), idx(0, i)]]
    return Mesh(V, T, B, [tag] * len(B))


@pytest.fixture(scope="session")
def two_hole():
    return builtin_mesh("two_hole")


@pytest.fixture(scope="session")
def square():
    return builtin_mesh("square")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
