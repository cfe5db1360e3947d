"""
Shared fixtures: small meshes, cameras and grids.
"""

import os

import numpy as np
import pytest

from scanbench.main.camera import CameraModel
from scanbench.main.mesh import TriangleMesh
from scanbench.main.occupancy import new_grid

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')

ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def icosahedron_vertices():
    t = (1.0 + 5.0 ** 0.5) / 2.0
    vertices = np.array([
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ], dtype=np.float64)
    return vertices / np.linalg.norm(vertices, axis=1, keepdims=True)


def icosphere(subdivisions=2, radius=0.125, center=(0.0, 0.0, 0.0)):
    """Vertices on a sphere; every edge is split at its midpoint, then projected"""
    vertices = [tuple(vertex) for vertex in icosahedron_vertices()]
    faces = list(ICOSAHEDRON_FACES)
    for _ in range(subdivisions):
        midpoints = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoints:
                point = (np.array(vertices[a]) + np.array(vertices[b])) / 2.0
                vertices.append(tuple(point / np.linalg.norm(point)))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined
    points = np.asarray(center) + radius * np.array(vertices)
    return TriangleMesh(points, faces, name='sphere')


def box_mesh(lower, upper, name='box'):
    """Axis-aligned box with 12 triangles"""
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    corners = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=np.float64)
    vertices = lower + corners * (upper - lower)
    faces = [
        (0, 1, 3), (0, 3, 2), (4, 6, 7), (4, 7, 5),
        (0, 4, 5), (0, 5, 1), (2, 3, 7), (2, 7, 6),
        (0, 2, 6), (0, 6, 4), (1, 5, 7), (1, 7, 3),
    ]
    return TriangleMesh(vertices, faces, name=name)


def write_obj(path, mesh):
    with open(path, 'w') as outfile:
        for vertex in mesh.vertices:
            outfile.write('v %.12g %.12g %.12g\n' % tuple(vertex))
        for triangle in mesh.triangles:
            outfile.write('f %d %d %d\n' % tuple(index + 1 for index in triangle))
    return str(path)


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def cube_path():
    return os.path.join(DATA_DIR, 'cube.obj')


@pytest.fixture(scope='session')
def sphere():
    """0.25 m diameter sphere at the origin"""
    return icosphere(subdivisions=3)


@pytest.fixture
def sphere_path(tmp_path, sphere):
    return write_obj(tmp_path / 'sphere.obj', sphere)


@pytest.fixture
def icosahedron_path(tmp_path):
    mesh = TriangleMesh(icosahedron_vertices(), ICOSAHEDRON_FACES, name='icosahedron')
    return write_obj(tmp_path / 'icosahedron.obj', mesh)


@pytest.fixture
def small_camera():
    return CameraModel(width=33, height=33, fov_x=45.0, fov_y=45.0, max_range=2.0)


@pytest.fixture
def grid():
    """0.8 m cube at 0.02 m cells centered on the origin"""
    return new_grid((-0.4, -0.4, -0.4), 0.8, 0.02)
