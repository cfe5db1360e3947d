"""
Refinement of sampled pose horizons: drop poses that come too close to
occupied space, then keep the fewest poses whose polyline stays within a
distance budget of the full horizon.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import logging
import math
from dataclasses import dataclass, field

# pylint: disable=E0401
import numpy as np
from scipy.spatial import cKDTree

# pylint: disable=E0402
from .exceptions import NumericalError
from .geometry import interpolate_pose

LOGGER = logging.getLogger(__name__)

DEFAULT_KAPPA_OCC = 0.9
DEFAULT_R_MIN = 0.1
DEFAULT_ETA = 0.02


@dataclass(frozen=True)
class BubbleReport:
    """Free radius around one pose and whether the pose survived"""
    radius: float
    kept: bool


@dataclass
class OptimizedHorizon:
    """Kept poses, their indices into the collision-free horizon and the achieved loss"""
    poses: list = field(default_factory=list)
    indices: list = field(default_factory=list)
    loss: float = 0.0
    free_count: int = 0
    reports: list = field(default_factory=list)

    @property
    def empty(self):
        """No pose survived the collision filter"""
        return not self.poses

    def __len__(self):
        return len(self.poses)


def translations(poses):
    """Stack pose translations into (n, 3)"""
    return np.array([pose.translation for pose in poses], dtype=np.float64).reshape(-1, 3)


def bubble_filter(horizon, grid, kappa_occ=DEFAULT_KAPPA_OCC, r_min=DEFAULT_R_MIN):
    """Keep poses whose nearest occupied cell center is at least r_min away"""
    centers = grid.occupied_centers(kappa_occ)
    if centers.shape[0] == 0:
        radii = np.full(len(horizon), np.inf)
    else:
        radii, _ = cKDTree(centers).query(translations(horizon))

    reports = [BubbleReport(float(radius), bool(radius >= r_min)) for radius in radii]
    kept = [pose for pose, report in zip(horizon, reports) if report.kept]
    return kept, reports


def segment_distances(points, start, end):
    """Distance from each point (n, 3) to the segment [start, end]"""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    direction = end - start
    length_squared = float(direction.dot(direction))
    if length_squared == 0.0:
        return np.linalg.norm(points - start, axis=1)
    fraction = np.clip((points - start) @ direction / length_squared, 0.0, 1.0)
    return np.linalg.norm(points - (start + fraction[:, None] * direction), axis=1)


def interpolate(horizon, s):
    """Pose at arc-length fraction s along the horizon polyline, orientation
    spherically interpolated within the segment"""
    if len(horizon) == 1:
        return horizon[0]
    s = float(np.clip(s, 0.0, 1.0))
    points = translations(horizon)
    lengths = np.linalg.norm(np.diff(points, axis=0), axis=1)
    total = float(lengths.sum())
    if total == 0.0:
        return horizon[0] if s < 1.0 else horizon[-1]
    if s == 1.0:
        return horizon[-1]

    target = s * total
    cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
    segment = int(np.searchsorted(cumulative, target, side='right')) - 1
    segment = min(max(segment, 0), len(lengths) - 1)
    while lengths[segment] == 0.0 and segment < len(lengths) - 1:
        segment += 1
    fraction = (target - cumulative[segment]) / lengths[segment] if lengths[segment] > 0 else 1.0
    return interpolate_pose(horizon[segment], horizon[segment + 1], fraction)


def reconstruction_loss(approx, original):
    """Largest distance from an original translation to the approximating polyline"""
    points = translations(original)
    corners = translations(approx)
    if corners.shape[0] == 1:
        return float(np.linalg.norm(points - corners[0], axis=1).max())
    nearest = np.full(points.shape[0], np.inf)
    for start, end in zip(corners[:-1], corners[1:]):
        nearest = np.minimum(nearest, segment_distances(points, start, end))
    return float(nearest.max())


def feasible_edges(points, eta):
    """feasible[i, j]: every point strictly between i and j lies within eta of segment (i, j)"""
    count = points.shape[0]
    feasible = np.zeros((count, count), dtype=bool)
    for i in range(count - 1):
        feasible[i, i + 1] = True
        for j in range(i + 2, count):
            feasible[i, j] = bool(segment_distances(points[i + 1:j], points[i], points[j]).max() <= eta)
    return feasible


def extract_viewpoints(horizon, eta=DEFAULT_ETA):
    """Fewest-pose index chain from the first to the last pose whose edges all
    respect eta; ties go to the lexicographically smallest chain"""
    count = len(horizon)
    if count == 0:
        return OptimizedHorizon()
    if count == 1:
        return OptimizedHorizon(poses=[horizon[0]], indices=[0], loss=0.0, free_count=1)

    feasible = feasible_edges(translations(horizon), eta)

    # cost[i]: fewest poses on a feasible chain from i to the last pose
    cost = np.full(count, count + 1, dtype=np.int64)
    following = np.full(count, -1, dtype=np.int64)
    cost[count - 1] = 1
    for i in range(count - 2, -1, -1):
        for j in range(i + 1, count):
            if feasible[i, j] and cost[j] + 1 < cost[i]:
                cost[i] = cost[j] + 1
                following[i] = j

    indices = [0]
    while indices[-1] != count - 1:
        indices.append(int(following[indices[-1]]))

    poses = [horizon[index] for index in indices]
    loss = reconstruction_loss(poses, horizon)
    if loss > eta:
        raise NumericalError('viewpoint extraction exceeded its budget: ' + str(loss) + ' > ' + str(eta))
    return OptimizedHorizon(poses=poses, indices=indices, loss=loss, free_count=count)


def optimize(horizon, grid, kappa_occ=DEFAULT_KAPPA_OCC, r_min=DEFAULT_R_MIN, eta=DEFAULT_ETA):
    """Collision filter, then viewpoint extraction on the surviving poses"""
    kept, reports = bubble_filter(horizon, grid, kappa_occ, r_min)
    if not kept:
        LOGGER.warning('all %d horizon poses are closer than %.3f m to occupied space', len(horizon), r_min)
        return OptimizedHorizon(reports=reports)
    result = extract_viewpoints(kept, eta)
    result.reports = reports
    LOGGER.debug('horizon %d -> %d free -> %d viewpoints (loss %.4f)', len(horizon), len(kept),
                 len(result), result.loss)
    return result


def densify(poses, spacing, start=None):
    """Poses along the polyline through `poses` (preceded by start) with
    consecutive translations at most `spacing` apart; every waypoint is kept.
    The start pose itself is not part of the result."""
    waypoints = ([start] if start is not None else []) + list(poses)
    if not waypoints:
        return []
    result = [] if start is not None else [waypoints[0]]
    for first, second in zip(waypoints[:-1], waypoints[1:]):
        distance = float(np.linalg.norm(second.translation - first.translation))
        pieces = max(1, int(math.ceil(distance / spacing - 1e-9)))
        for piece in range(1, pieces):
            result.append(interpolate_pose(first, second, piece / pieces))
        result.append(second)
    return result
