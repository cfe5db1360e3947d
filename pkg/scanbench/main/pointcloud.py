"""
World-frame point clouds, ASCII PLY export and Poisson disk sampling
of mesh surfaces for ground truth.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import logging
import math
from dataclasses import dataclass

# pylint: disable=E0401
import numpy as np
from scipy.spatial import cKDTree

# pylint: disable=E0402
from .exceptions import FormatError, MeshError

LOGGER = logging.getLogger(__name__)

DEFAULT_DISK_RADIUS = 0.004
DEFAULT_FAILURE_BUDGET = 3000
CANDIDATE_BATCH = 4096


@dataclass(frozen=True, eq=False)
class PointCloud:
    """World-frame points in meters, shape (n, 3)"""
    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise FormatError('point cloud holds non-finite coordinates')
        points.flags.writeable = False
        object.__setattr__(self, 'points', points)

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def empty(cls):
        """Cloud without points"""
        return cls(np.zeros((0, 3)))

    def merged(self, other):
        """Concatenate two clouds"""
        return PointCloud(np.concatenate([self.points, other.points]))


def write_ply(path, cloud):
    """Write x y z per vertex as ASCII PLY"""
    with open(path, 'w') as outfile:
        outfile.write('ply\nformat ascii 1.0\n')
        outfile.write('element vertex ' + str(len(cloud)) + '\n')
        outfile.write('property float x\nproperty float y\nproperty float z\nend_header\n')
        for x, y, z in cloud.points:
            outfile.write('%.9g %.9g %.9g\n' % (x, y, z))


def read_ply_points(path):
    """Read the vertex positions of an ASCII PLY point cloud"""
    with open(path, 'r') as infile:
        lines = infile.read().split('\n')
    if not lines or lines[0].strip() != 'ply':
        raise FormatError(path + ': missing "ply" magic')
    try:
        header_end = [line.strip() for line in lines].index('end_header')
    except ValueError:
        raise FormatError(path + ': missing end_header') from None

    count = 0
    for line in lines[:header_end]:
        fields = line.split()
        if len(fields) == 3 and fields[0] == 'element' and fields[1] == 'vertex':
            count = int(fields[2])
    body = lines[header_end + 1:header_end + 1 + count]
    if len(body) != count:
        raise FormatError(path + ': expected ' + str(count) + ' vertices')
    return PointCloud([[float(value) for value in line.split()[:3]] for line in body])


def sample_surface(mesh, count, generator):
    """Area-weighted uniform random points on the mesh surface"""
    corners = mesh.corners()
    areas = mesh.areas()
    chosen = generator.choice(corners.shape[0], size=count, p=areas / areas.sum())

    u = generator.random((count, 1))
    v = generator.random((count, 1))
    # fold samples from the far half of the parallelogram back into the triangle
    flip = (u + v) > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]

    picked = corners[chosen]
    return picked[:, 0] + u * (picked[:, 1] - picked[:, 0]) + v * (picked[:, 2] - picked[:, 0])


def poisson_disk_sample(mesh, radius=DEFAULT_DISK_RADIUS, seed=0,
                        failure_budget=DEFAULT_FAILURE_BUDGET):
    """Dart throwing on the surface: accept a candidate only when no accepted
    point lies closer than radius; stop after failure_budget consecutive rejections."""
    if not radius > 0:
        raise MeshError('poisson radius should be > 0, got ' + str(radius))
    if mesh is None or mesh.triangles.shape[0] == 0:
        raise MeshError('cannot sample an empty mesh')

    generator = np.random.default_rng(seed)
    accepted = []
    failures = 0

    while failures < failure_budget:
        batch = sample_surface(mesh, CANDIDATE_BATCH, generator)
        blocked = np.zeros(batch.shape[0], dtype=bool)
        if accepted:
            distances, _ = cKDTree(np.array(accepted)).query(batch, k=1, distance_upper_bound=radius)
            blocked = distances < radius

        # in-batch conflicts, keyed by the later candidate
        earlier = [[] for _ in range(batch.shape[0])]
        for first, second in cKDTree(batch).query_pairs(radius, output_type='ndarray').tolist():
            earlier[max(first, second)].append(min(first, second))

        taken = np.zeros(batch.shape[0], dtype=bool)
        for index, candidate in enumerate(batch):
            if blocked[index] or taken[earlier[index]].any():
                failures += 1
                if failures >= failure_budget:
                    break
                continue
            failures = 0
            taken[index] = True
            accepted.append(candidate)

    LOGGER.debug('poisson disk: %d points at radius %.4f', len(accepted), radius)
    return PointCloud(np.array(accepted))


def expected_disk_count(area, radius):
    """Hexagonal packing count of radius-separated points over an area"""
    return area / (math.pi * radius * radius / 4.0) * math.pi / (2.0 * math.sqrt(3.0))
