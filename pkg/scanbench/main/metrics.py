"""
Scan quality metrics: surface coverage against ground truth, camera path
length and voxel downsampling of accumulated scans.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

# pylint: disable=E0401
import numpy as np
from scipy.spatial import cKDTree

# pylint: disable=E0402
from .exceptions import ConfigError, ShapeError
from .pointcloud import PointCloud


def as_points(cloud):
    return cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64).reshape(-1, 3)


def coverage(scan, gt, epsilon=0.01):
    """Fraction of ground-truth points with a scanned point within epsilon"""
    if not epsilon > 0:
        raise ConfigError('coverage epsilon should be > 0, got ' + str(epsilon))
    gt_points = as_points(gt)
    if gt_points.shape[0] == 0:
        raise ShapeError('ground truth point cloud is empty')
    scan_points = as_points(scan)
    if scan_points.shape[0] == 0:
        return 0.0
    distances, _ = cKDTree(scan_points).query(gt_points, k=1)
    return float(np.count_nonzero(distances <= epsilon)) / gt_points.shape[0]


def path_length(poses):
    """Sum of consecutive translation distances"""
    if len(poses) < 2:
        return 0.0
    points = np.array([pose.translation for pose in poses])
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).sum())


def voxel_keys(points, voxel):
    return np.floor(points / voxel).astype(np.int64)


def voxel_downsample(cloud, voxel):
    """One centroid per occupied voxel, ordered by voxel index"""
    if not voxel > 0:
        raise ConfigError('voxel size should be > 0, got ' + str(voxel))
    points = as_points(cloud)
    if points.shape[0] == 0:
        return PointCloud.empty()
    _, inverse, counts = np.unique(voxel_keys(points, voxel), axis=0, return_inverse=True,
                                   return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((counts.shape[0], 3))
    np.add.at(sums, inverse, points)
    return PointCloud(sums / counts[:, None])


class VoxelAccumulator():
    """Running per-voxel sums, so the downsampled cloud of every scan so far
    is available without keeping the raw points"""
    def __init__(self, voxel):
        if not voxel > 0:
            raise ConfigError('voxel size should be > 0, got ' + str(voxel))
        self.voxel = voxel
        self.sums = {}
        self.counts = {}
        self.total = 0

    def __len__(self):
        return len(self.counts)

    def add(self, cloud):
        """Accumulate the points of one scan"""
        points = as_points(cloud)
        if points.shape[0] == 0:
            return self
        keys, inverse, counts = np.unique(voxel_keys(points, self.voxel), axis=0, return_inverse=True,
                                          return_counts=True)
        sums = np.zeros((keys.shape[0], 3))
        np.add.at(sums, inverse.reshape(-1), points)
        for key, total, count in zip(map(tuple, keys.tolist()), sums, counts.tolist()):
            if key in self.counts:
                self.sums[key] = self.sums[key] + total
                self.counts[key] += count
            else:
                self.sums[key] = total
                self.counts[key] = count
        self.total += points.shape[0]
        return self

    def cloud(self):
        """Centroid per voxel, ordered by voxel index"""
        if not self.counts:
            return PointCloud.empty()
        keys = sorted(self.counts)
        return PointCloud(np.array([self.sums[key] / self.counts[key] for key in keys]))


class CoverageTracker():
    """Cumulative covered-mask over the ground truth. A ground-truth point
    counts as covered once any scan so far had a point within epsilon, so
    the reported fraction never decreases."""
    def __init__(self, gt, epsilon=0.01):
        if not epsilon > 0:
            raise ConfigError('coverage epsilon should be > 0, got ' + str(epsilon))
        self.gt = as_points(gt)
        if self.gt.shape[0] == 0:
            raise ShapeError('ground truth point cloud is empty')
        self.epsilon = epsilon
        self.covered = np.zeros(self.gt.shape[0], dtype=bool)
        self.pending = []

    def add(self, cloud):
        """Queue the points of one scan until the next value() call"""
        points = as_points(cloud)
        if points.shape[0]:
            self.pending.append(points)
        return self

    def value(self):
        """Covered fraction after folding in every queued scan"""
        if self.pending:
            open_indices = np.flatnonzero(~self.covered)
            if open_indices.shape[0]:
                bound = np.nextafter(self.epsilon, np.inf)
                tree = cKDTree(np.concatenate(self.pending))
                distances, _ = tree.query(self.gt[open_indices], k=1, distance_upper_bound=bound)
                self.covered[open_indices[distances <= self.epsilon]] = True
            self.pending = []
        return float(np.count_nonzero(self.covered)) / self.covered.shape[0]
