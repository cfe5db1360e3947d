import itertools
import math

import numpy as np
import pytest

from scanbench.main.expert import expert_trajectory
from scanbench.main.geometry import Pose, look_at
from scanbench.main.metrics import path_length
from scanbench.main.path_optimizer import (bubble_filter, densify, extract_viewpoints, interpolate,
                                           optimize, reconstruction_loss)

IDENTITY = np.array([0.0, 0.0, 0.0, 1.0])


def poses_at(points):
    return [Pose(point, IDENTITY) for point in np.asarray(points, dtype=np.float64)]


def point_segment_distance(point, start, end):
    direction = end - start
    fraction = min(max(np.dot(point - start, direction) / np.dot(direction, direction), 0.0), 1.0)
    return float(np.linalg.norm(point - (start + fraction * direction)))


def chain_is_feasible(points, chain, eta):
    for i, j in zip(chain[:-1], chain[1:]):
        for k in range(i + 1, j):
            if point_segment_distance(points[k], points[i], points[j]) > eta:
                return False
    return True


def exhaustive_chain(points, eta):
    """Fewest-pose feasible chain, lexicographically smallest among ties"""
    count = len(points)
    for size in range(2, count + 1):
        for middle in itertools.combinations(range(1, count - 1), size - 2):
            chain = [0, *middle, count - 1]
            if chain_is_feasible(points, chain, eta):
                return chain
    return list(range(count))


@pytest.fixture
def elbow():
    return poses_at([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])


class TestBubbleFilter:

    def test_matches_brute_force(self, grid):
        generator = np.random.default_rng(0)
        for _ in range(100):
            grid.cells = {}
            keys = [tuple(key) for key in generator.integers(0, 40, (generator.integers(1, 20), 3)).tolist()]
            for key in keys:
                grid.cells[key] = float(generator.choice([3.0, 0.5]))
            horizon = poses_at(generator.uniform(-0.4, 0.4, (8, 3)))
            kept, reports = bubble_filter(horizon, grid, kappa_occ=0.9, r_min=0.1)

            occupied = [key for key in keys if grid.cells[key] == 3.0]
            for pose, report in zip(horizon, reports):
                if occupied:
                    radius = min(np.linalg.norm(grid.cell_center(key) - pose.translation) for key in occupied)
                else:
                    radius = math.inf
                assert report.radius == pytest.approx(radius)
                assert report.kept == (radius >= 0.1)
            assert len(kept) == sum(report.kept for report in reports)

    def test_empty_grid_keeps_everything(self, grid):
        horizon = poses_at(np.zeros((3, 3)))
        kept, reports = bubble_filter(horizon, grid)
        assert len(kept) == 3
        assert all(math.isinf(report.radius) for report in reports)

    def test_order_is_preserved(self, grid):
        grid.cells[(20, 20, 20)] = 3.0
        horizon = poses_at([[0.3, 0.0, 0.0], [0.01, 0.0, 0.0], [-0.3, 0.0, 0.0]])
        kept, _ = bubble_filter(horizon, grid)
        assert [pose.translation[0] for pose in kept] == [0.3, -0.3]


class TestInterpolate:

    @pytest.mark.parametrize('s, expected', [
        (0.0, [0.0, 0.0, 0.0]), (0.25, [0.5, 0.0, 0.0]), (0.5, [1.0, 0.0, 0.0]),
        (0.75, [1.0, 0.5, 0.0]), (1.0, [1.0, 1.0, 0.0]),
    ])
    def test_elbow(self, elbow, s, expected):
        assert np.allclose(interpolate(elbow, s).translation, expected)

    def test_single_pose(self):
        pose = look_at([0.3, 0.0, 0.0], [0.0, 0.0, 0.0])
        assert interpolate([pose], 0.4) is pose

    def test_orientation_is_interpolated(self):
        first = look_at([1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
        second = look_at([0.0, 1.0, 0.0], [0.0, 0.0, 0.0])
        middle = interpolate([first, second], 0.5)
        rotation = middle.rotation_matrix()
        assert np.allclose(rotation @ rotation.T, np.eye(3), atol=1e-9)
        axis = middle.optical_axis()
        assert np.allclose(axis, -np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0), atol=1e-6)


class TestReconstructionLoss:

    def test_elbow_endpoints(self, elbow):
        assert reconstruction_loss([elbow[0], elbow[2]], elbow) == pytest.approx(math.sqrt(2.0) / 2.0)

    def test_full_horizon_is_exact(self, elbow):
        assert reconstruction_loss(elbow, elbow) == 0.0


class TestExtractViewpoints:

    def test_matches_exhaustive_search(self):
        generator = np.random.default_rng(1)
        for _ in range(100):
            count = int(generator.integers(8, 13))
            steps = generator.normal(0.0, 0.02, (count, 3)) + [0.02, 0.0, 0.0]
            points = np.cumsum(steps, axis=0)
            result = extract_viewpoints(poses_at(points), 0.02)
            assert result.indices == exhaustive_chain(points, 0.02)
            assert result.loss <= 0.02

    @pytest.mark.parametrize('eta', [0.005, 0.05])
    def test_matches_exhaustive_search_other_budgets(self, eta):
        generator = np.random.default_rng(7)
        for _ in range(30):
            count = int(generator.integers(2, 9))
            points = np.cumsum(generator.normal(0.0, 0.02, (count, 3)) + [0.02, 0.0, 0.0], axis=0)
            assert extract_viewpoints(poses_at(points), eta).indices == exhaustive_chain(points, eta)

    def test_endpoints_are_kept(self):
        points = np.random.default_rng(2).normal(size=(12, 3))
        result = extract_viewpoints(poses_at(points), eta=0.5)
        assert result.indices[0] == 0
        assert result.indices[-1] == 11

    def test_collinear_keeps_two(self):
        points = np.linspace([0.0, 0.0, 0.0], [0.3, 0.15, 0.0], 16)
        assert extract_viewpoints(poses_at(points), eta=0.001).indices == [0, 15]

    def test_zero_budget_keeps_everything(self):
        points = np.random.default_rng(3).normal(size=(10, 3))
        assert extract_viewpoints(poses_at(points), eta=0.0).indices == list(range(10))

    def test_larger_budget_never_keeps_more(self):
        generator = np.random.default_rng(4)
        for _ in range(20):
            points = np.cumsum(generator.normal(0.0, 0.02, (16, 3)), axis=0)
            sizes = [len(extract_viewpoints(poses_at(points), eta)) for eta in (0.0, 0.005, 0.01, 0.02, 0.05, 1.0)]
            assert sizes == sorted(sizes, reverse=True)
            assert sizes[-1] == 2

    def test_small_horizons(self):
        assert extract_viewpoints([]).empty
        single = extract_viewpoints(poses_at([[0.1, 0.2, 0.3]]))
        assert single.indices == [0]
        assert single.loss == 0.0


class TestOptimize:

    def test_all_unsafe(self, grid):
        grid.cells[(20, 20, 20)] = 3.0
        horizon = poses_at(np.random.default_rng(5).uniform(-0.02, 0.02, (6, 3)))
        result = optimize(horizon, grid)
        assert result.empty
        assert len(result.reports) == 6
        assert not any(report.kept for report in result.reports)

    def test_unsafe_poses_are_dropped(self, grid):
        grid.cells[(20, 20, 20)] = 3.0
        horizon = poses_at([[0.3, 0.0, 0.0], [0.3, 0.01, 0.0], [0.0, 0.0, 0.0], [0.3, 0.03, 0.0]])
        result = optimize(horizon, grid)
        assert result.free_count == 3
        assert all(np.linalg.norm(pose.translation) >= 0.1 for pose in result.poses)
        assert result.poses[-1].translation.tolist() == [0.3, 0.03, 0.0]

    def test_jittered_expert_horizons_get_shorter(self, grid, sphere):
        reductions = []
        for seed in range(10):
            trajectory = expert_trajectory(sphere, 500, seed=seed, jitter_deg=2.0)
            for start in range(0, 160, 16):
                horizon = trajectory[start:start + 16]
                result = optimize(horizon, grid, eta=0.02)
                assert len(result) < len(horizon)
                assert path_length(result.poses) < path_length(horizon)
                reductions.append(1.0 - path_length(result.poses) / path_length(horizon))
        assert len(reductions) == 100
        assert np.median(reductions) >= 0.1


class TestDensify:

    def test_spacing(self):
        poses = poses_at([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        dense = densify(poses, 0.3)
        assert len(dense) == 5
        assert dense[0] is poses[0]
        assert dense[-1] is poses[-1]
        steps = np.linalg.norm(np.diff([pose.translation for pose in dense], axis=0), axis=1)
        assert steps.max() <= 0.3 + 1e-12

    def test_start_is_excluded(self):
        start, goal = poses_at([[0.0, 0.0, 0.0], [0.0, 0.2, 0.0]])
        dense = densify([goal], 0.05, start=start)
        assert len(dense) == 4
        assert dense[-1] is goal
        assert np.allclose(dense[0].translation, [0.0, 0.05, 0.0])

    def test_short_hops_unchanged(self):
        poses = poses_at([[0.0, 0.0, 0.0], [0.01, 0.0, 0.0], [0.02, 0.0, 0.0]])
        assert densify(poses, 0.05) == poses

    def test_empty(self):
        assert densify([], 0.05) == []
