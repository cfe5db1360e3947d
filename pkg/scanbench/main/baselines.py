"""
Non-learned viewpoint planners (random free-space poses, random and
Fibonacci hemispheres) and the open-tour ordering that turns a viewpoint
set into a path.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import math
from dataclasses import dataclass

# pylint: disable=E0401
import numpy as np
from scipy.spatial.distance import cdist

# pylint: disable=E0402
from .exceptions import ConfigError
from .geometry import aim

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
MAX_TWO_OPT_PASSES = 50
INITIAL_ELEVATION = 30.0


@dataclass
class ViewpointSet:
    """Unordered look-at viewpoints and how they were generated"""
    poses: list
    kind: str
    seed: int = None
    radius: float = None

    def __len__(self):
        return len(self.poses)

    @property
    def count(self):
        return len(self.poses)


def check_count(count):
    if count < 1:
        raise ConfigError('viewpoint count should be >= 1, got ' + str(count))


def random_poses(count, bounds, seed, center, exclusion):
    """Translations uniform in bounds (lower, upper) outside the exclusion box
    (lower, upper), each looking at center"""
    check_count(count)
    lower, upper = (np.asarray(value, dtype=np.float64) for value in bounds)
    box_lower, box_upper = (np.asarray(value, dtype=np.float64) for value in exclusion)
    generator = np.random.default_rng(seed)

    accepted = []
    while len(accepted) < count:
        candidates = generator.uniform(lower, upper, size=(2 * count, 3))
        inside = np.all((candidates >= box_lower) & (candidates <= box_upper), axis=1)
        accepted.extend(candidates[~inside])
    poses = [aim(eye, center) for eye in accepted[:count]]
    return ViewpointSet(poses, 'random', seed=seed)


def hemisphere_points(center, radius, heights, azimuths):
    """Points on the upper hemisphere from unit heights in [0, 1] and azimuths"""
    horizontal = np.sqrt(np.clip(1.0 - heights * heights, 0.0, 1.0))
    directions = np.stack([horizontal * np.cos(azimuths), horizontal * np.sin(azimuths), heights], axis=1)
    return np.asarray(center, dtype=np.float64) + radius * directions


def fibonacci_hemisphere(count, center, radius):
    """Golden-angle lattice on the upper hemisphere; a single viewpoint sits at the pole"""
    check_count(count)
    if not radius > 0:
        raise ConfigError('hemisphere radius should be > 0, got ' + str(radius))
    if count == 1:
        heights = np.ones(1)
    else:
        heights = 1.0 - (np.arange(count) + 0.5) / count
    azimuths = GOLDEN_ANGLE * np.arange(count)
    points = hemisphere_points(center, radius, heights, azimuths)
    return ViewpointSet([aim(eye, center) for eye in points], 'uniform-hemisphere', radius=radius)


def random_hemisphere(count, center, radius, seed):
    """Area-uniform hemisphere samples: uniform height and uniform azimuth"""
    check_count(count)
    if not radius > 0:
        raise ConfigError('hemisphere radius should be > 0, got ' + str(radius))
    generator = np.random.default_rng(seed)
    heights = generator.uniform(0.0, 1.0, size=count)
    azimuths = generator.uniform(0.0, 2.0 * math.pi, size=count)
    points = hemisphere_points(center, radius, heights, azimuths)
    return ViewpointSet([aim(eye, center) for eye in points], 'random-hemisphere', seed=seed,
                        radius=radius)


def open_tour_length(points, order):
    """Length of the open path through points in order"""
    path = points[order]
    return float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())


def nearest_neighbor_order(distances):
    """Greedy open tour from node 0"""
    count = distances.shape[0]
    visited = np.zeros(count, dtype=bool)
    order = [0]
    visited[0] = True
    for _ in range(count - 1):
        remaining = np.where(visited, np.inf, distances[order[-1]])
        following = int(np.argmin(remaining))
        order.append(following)
        visited[following] = True
    return order


def two_opt(order, distances, max_passes=MAX_TWO_OPT_PASSES):
    """First-improvement 2-opt on an open path with a fixed first node"""
    order = list(order)
    count = len(order)
    for _ in range(max_passes):
        improved = False
        for i in range(1, count - 1):
            for j in range(i + 1, count):
                before = distances[order[i - 1], order[i]]
                after = distances[order[i - 1], order[j]]
                if j + 1 < count:
                    before += distances[order[j], order[j + 1]]
                    after += distances[order[i], order[j + 1]]
                if after < before - 1e-12:
                    order[i:j + 1] = reversed(order[i:j + 1])
                    improved = True
        if not improved:
            break
    return order


def tsp_order(viewpoints, start):
    """Visit every viewpoint once on a short open tour from start.
    The start pose is not part of the returned list."""
    poses = list(viewpoints.poses if isinstance(viewpoints, ViewpointSet) else viewpoints)
    if not poses:
        raise ConfigError('cannot order an empty viewpoint set')
    points = np.array([start.translation] + [pose.translation for pose in poses])
    distances = cdist(points, points)
    order = two_opt(nearest_neighbor_order(distances), distances)
    return [poses[index - 1] for index in order[1:]]


def initial_poses(center, radius, count=3, elevation=INITIAL_ELEVATION):
    """Start poses evenly spread in azimuth at a fixed elevation, looking at center"""
    azimuths = np.radians(360.0 * np.arange(count) / count)
    heights = np.full(count, math.sin(math.radians(elevation)))
    points = hemisphere_points(center, radius, heights, azimuths)
    return [aim(eye, center) for eye in points]
