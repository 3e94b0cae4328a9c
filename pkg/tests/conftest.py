import numpy as np
import pytest

from cdgsurf import Discretization, Sphere, Torus, TriangleMesh, generate_mesh


@pytest.fixture(scope="session")
def sphere():
    return Sphere()


@pytest.fixture(scope="session")
def torus():
    return Torus()


@pytest.fixture(scope="session")
def ico_disc(sphere):
    return Discretization(generate_mesh(sphere, 0))


@pytest.fixture(scope="session")
def sphere_disc2(sphere):
    return Discretization(generate_mesh(sphere, 2))


@pytest.fixture(scope="session")
def torus_disc2(torus):
    return Discretization(generate_mesh(torus, 2))


def flat_pillow(fold: float = 0.0) -> TriangleMesh:
    """Unit square split along 0-2 on top and along 1-3 underneath.

    The two top triangles are the unit right triangles sharing the diagonal
    (0,0)-(1,1); ``fold`` lifts vertex 3 out of the plane so they are no
    longer coplanar. The underside closes the surface so every edge has two
    faces.
    """
    v = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, fold]])
    faces = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]])
    return TriangleMesh(v, faces, Sphere(10.0))
