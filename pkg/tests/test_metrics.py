import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from scanbench.main.exceptions import ConfigError, ShapeError
from scanbench.main.geometry import Pose
from scanbench.main.metrics import CoverageTracker, VoxelAccumulator, coverage, path_length, voxel_downsample
from scanbench.main.pointcloud import PointCloud


def brute_force_coverage(scan, gt, epsilon):
    covered = 0
    for point in gt:
        if scan.shape[0] and np.linalg.norm(scan - point, axis=1).min() <= epsilon:
            covered += 1
    return covered / gt.shape[0]


def hashed_downsample(points, voxel):
    groups = {}
    for point in points:
        groups.setdefault(tuple(np.floor(point / voxel).astype(np.int64).tolist()), []).append(point)
    return {key: np.mean(value, axis=0) for key, value in groups.items()}


class TestCoverage:

    def test_example(self):
        gt = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        scan = np.array([[0.005, 0.0, 0.0], [1.0, 0.009, 0.0], [2.5, 0.0, 0.0]])
        assert coverage(scan, gt, 0.01) == pytest.approx(2.0 / 3.0)

    def test_matches_brute_force(self):
        generator = np.random.default_rng(0)
        for _ in range(20):
            gt = generator.uniform(0.0, 0.2, (200, 3))
            scan = generator.uniform(0.0, 0.2, (int(generator.integers(0, 300)), 3))
            assert coverage(scan, gt, 0.02) == pytest.approx(brute_force_coverage(scan, gt, 0.02))

    def test_rigid_motion_invariance(self):
        generator = np.random.default_rng(1)
        gt = generator.uniform(0.0, 0.2, (300, 3))
        scan = gt[:150] + generator.normal(0.0, 0.005, (150, 3))
        rotation = Rotation.random(random_state=2).as_matrix()
        shift = np.array([0.3, -1.0, 2.0])
        moved = coverage(scan @ rotation.T + shift, gt @ rotation.T + shift, 0.01)
        assert moved == pytest.approx(coverage(scan, gt, 0.01))

    def test_more_points_never_lower_coverage(self):
        generator = np.random.default_rng(3)
        gt = generator.uniform(0.0, 0.2, (300, 3))
        scan = generator.uniform(0.0, 0.2, (50, 3))
        values = [coverage(scan[:count], gt, 0.02) for count in range(0, 51, 5)]
        assert values == sorted(values)

    def test_empty_scan(self):
        assert coverage(PointCloud.empty(), np.zeros((4, 3)), 0.01) == 0.0

    def test_full_coverage(self):
        gt = np.random.default_rng(4).uniform(size=(20, 3))
        assert coverage(gt, gt, 1e-6) == 1.0

    def test_invalid_inputs(self):
        with pytest.raises(ConfigError):
            coverage(np.zeros((1, 3)), np.zeros((1, 3)), 0.0)
        with pytest.raises(ShapeError):
            coverage(np.zeros((1, 3)), np.zeros((0, 3)), 0.01)


class TestPathLength:

    def test_triangle(self):
        poses = [Pose(point, [0.0, 0.0, 0.0, 1.0]) for point in ([0, 0, 0], [3, 0, 0], [3, 4, 0])]
        assert path_length(poses) == pytest.approx(7.0)

    def test_single_pose(self):
        assert path_length([Pose.identity()]) == 0.0
        assert path_length([]) == 0.0


class TestVoxelDownsample:

    def test_matches_hash_grouping(self):
        points = np.random.default_rng(5).uniform(-0.1, 0.1, (2000, 3))
        result = voxel_downsample(points, 0.02)
        expected = hashed_downsample(points, 0.02)
        assert len(result) == len(expected)
        keys = [tuple(key) for key in np.floor(result.points / 0.02).astype(np.int64).tolist()]
        assert keys == sorted(expected)
        for key, point in zip(keys, result.points):
            assert np.allclose(point, expected[key])

    def test_one_point_per_voxel(self):
        points = np.array([[0.001, 0.001, 0.001], [0.002, 0.003, 0.004], [0.011, 0.0, 0.0]])
        result = voxel_downsample(points, 0.01)
        assert len(result) == 2
        assert np.allclose(result.points[0], [0.0015, 0.002, 0.0025])

    def test_empty(self):
        assert len(voxel_downsample(PointCloud.empty(), 0.01)) == 0

    def test_invalid_voxel(self):
        with pytest.raises(ConfigError):
            voxel_downsample(np.zeros((1, 3)), 0.0)


class TestVoxelAccumulator:

    def test_incremental_equals_batch(self):
        generator = np.random.default_rng(6)
        scans = [generator.uniform(-0.1, 0.1, (int(generator.integers(1, 400)), 3)) for _ in range(6)]
        accumulator = VoxelAccumulator(0.01)
        for scan in scans:
            accumulator.add(PointCloud(scan))
        batch = voxel_downsample(np.concatenate(scans), 0.01)
        assert len(accumulator) == len(batch)
        assert np.allclose(accumulator.cloud().points, batch.points)
        assert accumulator.total == sum(scan.shape[0] for scan in scans)

    def test_empty(self):
        accumulator = VoxelAccumulator(0.01).add(PointCloud.empty())
        assert len(accumulator.cloud()) == 0

    def test_invalid_voxel(self):
        with pytest.raises(ConfigError):
            VoxelAccumulator(-0.01)


class TestCoverageTracker:

    def test_shifting_centroid_keeps_coverage(self):
        gt = np.array([[-0.0045, 0.0, 0.0]])
        accumulator = VoxelAccumulator(0.005)
        tracker = CoverageTracker(gt, 0.01)
        scans = [np.array([[0.005, 0.0, 0.0]]), np.array([[0.0099, 0.0049, 0.0049]])]

        values = []
        for scan in scans:
            accumulator.add(scan)
            values.append(tracker.add(scan).value())
        assert values == [1.0, 1.0]
        assert coverage(accumulator.cloud(), gt, 0.01) == 0.0

    def test_matches_union_of_scans(self):
        rng = np.random.default_rng(3)
        gt = rng.uniform(0.0, 0.2, size=(300, 3))
        tracker = CoverageTracker(gt, 0.02)
        seen = np.zeros((0, 3))
        previous = 0.0
        for _ in range(5):
            scan = rng.uniform(0.0, 0.2, size=(40, 3))
            seen = np.vstack([seen, scan])
            value = tracker.add(scan).value()
            assert value == pytest.approx(brute_force_coverage(seen, gt, 0.02))
            assert value >= previous
            previous = value

    def test_pending_scans_fold_in_together(self):
        gt = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        tracker = CoverageTracker(gt, 0.01)
        tracker.add(np.array([[0.0, 0.005, 0.0]])).add(np.array([[1.0, 0.0, 0.01]]))
        assert tracker.value() == 1.0

    def test_empty_scan_leaves_value(self):
        tracker = CoverageTracker(np.array([[0.0, 0.0, 0.0]]))
        assert tracker.add(np.zeros((0, 3))).value() == 0.0

    def test_invalid_inputs(self):
        with pytest.raises(ConfigError):
            CoverageTracker(np.zeros((1, 3)), 0.0)
        with pytest.raises(ShapeError):
            CoverageTracker(np.zeros((0, 3)))
