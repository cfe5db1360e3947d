"""
One scanning episode: observe, integrate, plan, move, for a fixed step
budget, with per-run logging into a RunRecord.

Planners hand out one pose per step. The learned planner samples a horizon
whenever its queue is empty, optionally refines it, and queues the result
densified at the motion bound from the current pose. Baselines and the
expert replay a precomputed path.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import json
import logging
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field

# pylint: disable=E0401
import numpy as np
import torch

# pylint: disable=E0402
from .baselines import (fibonacci_hemisphere, initial_poses, random_hemisphere, random_poses,
                        tsp_order)
from .camera import add_depth_noise, backproject, median_filter_depth, render_depth
from .config import LEARNED_KINDS
from .exceptions import ConfigError, FormatError
from .expert import expert_trajectory
from .geometry import Pose, aim
from .mesh import load_mesh
from .metrics import CoverageTracker, VoxelAccumulator, path_length
from .occupancy import new_grid
from .path_optimizer import densify, optimize
from .pointcloud import poisson_disk_sample
from .policy import load_policy, sample_actions

LOGGER = logging.getLogger(__name__)

SEED_STRIDE = 1000003


@dataclass
class RunRecord:
    """Everything logged during one episode"""
    run_id: str
    policy: str
    object: str
    scale: float
    noise_std: float
    fov_x: float
    fov_y: float
    seed: int
    init_pose_id: int
    steps: int = 0
    poses: list = field(default_factory=list)
    cloud_sizes: list = field(default_factory=list)
    path_lengths: list = field(default_factory=list)
    coverage: list = field(default_factory=list)
    horizons: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    poses_after_opt: int = 0
    runtime_s: float = 0.0

    @property
    def coverage_final(self):
        """Coverage at the last checkpoint"""
        return self.coverage[-1][1] if self.coverage else 0.0

    @property
    def path_length_m(self):
        """Total camera travel"""
        return self.path_lengths[-1] if self.path_lengths else 0.0

    def pose_list(self):
        """Executed poses as Pose objects"""
        return [Pose.from_dict(entry) for entry in self.poses]

    def row(self):
        """Result row in CSV column order"""
        return {
            'policy': self.policy, 'object': self.object, 'scale': self.scale,
            'noise_std': self.noise_std, 'fov_x': self.fov_x, 'fov_y': self.fov_y,
            'seed': self.seed, 'init_pose_id': self.init_pose_id, 'steps': self.steps,
            'coverage_final': round(self.coverage_final, 6), 'path_length_m': round(self.path_length_m, 6),
            'poses_after_opt': self.poses_after_opt, 'runtime_s': round(self.runtime_s, 3),
        }

    def to_json(self):
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
            data['coverage'] = [tuple(entry) for entry in data['coverage']]
            return cls(**data)
        except (ValueError, KeyError, TypeError) as exception_error:
            raise FormatError('malformed run record: ' + exception_error.__str__()) from None


class ReplayPlanner():
    """Follow a fixed pose queue, holding the last pose once it runs out"""
    def __init__(self, queue, viewpoints):
        self.queue = list(queue)
        self.viewpoints = viewpoints

    def next_pose(self, pose, history, grid, record, step):
        if not self.queue:
            return pose
        return self.queue.pop(0)


class LearnedPlanner():
    """Sample, optionally refine, then execute a horizon before sampling again"""
    def __init__(self, policy, config, seed, refine=True):
        self.policy = policy
        self.config = config
        self.refine = refine
        self.generator = torch.Generator().manual_seed(seed)
        self.queue = []
        self.kept = 0

    def next_pose(self, pose, history, grid, record, step):
        if not self.queue:
            horizon = sample_actions(self.policy, grid, history, self.generator)
            entry = {'step': step, 'sampled': len(horizon)}
            if self.refine:
                result = optimize(horizon, grid, self.config.grid.kappa_occ, self.config.optimizer.r_min,
                                  self.config.optimizer.eta)
                entry.update(free=result.free_count, kept=len(result), loss=result.loss)
                record.horizons.append(entry)
                if result.empty:
                    LOGGER.warning('step %d: empty optimized horizon, holding pose', step)
                    return pose
                waypoints = result.poses
            else:
                entry.update(free=len(horizon), kept=len(horizon), loss=0.0)
                record.horizons.append(entry)
                waypoints = horizon
            self.kept += len(waypoints)
            self.queue = densify(waypoints, self.config.motion_bound, start=pose)
            if not self.queue:
                return pose
        return self.queue.pop(0)


class Episode():
    """Mutable state of one scanning run"""
    def __init__(self, config, policy=None, seed=0, init_pose_id=0, mesh=None, gt=None):
        self.config = config
        self.seed = seed
        self.init_pose_id = init_pose_id
        self.mesh = mesh if mesh is not None else load_mesh(config.mesh, config.scale)
        self.camera = config.camera.model()
        self.gt = gt if gt is not None else poisson_disk_sample(self.mesh, config.gt_radius, seed=0)
        self.center = self.mesh.center()

        half = 0.5 * config.grid.extent
        self.grid = new_grid(self.center - half, config.grid.extent, config.grid.cell_size)
        self.accumulator = VoxelAccumulator(config.downsample_voxel)
        self.tracker = CoverageTracker(self.gt, config.coverage_epsilon)
        self.motion = np.random.default_rng(seed * SEED_STRIDE + 7)
        self.timings = defaultdict(float)

        self.record = RunRecord(
            run_id=run_id(config, seed, init_pose_id),
            policy=config.policy, object=config.object_name, scale=config.scale,
            noise_std=config.noise_std, fov_x=self.camera.fov_x, fov_y=self.camera.fov_y,
            seed=seed, init_pose_id=init_pose_id,
        )
        self.start = self.initial_pose()
        self.planner = self.make_planner(policy)

    def initial_pose(self):
        if self.config.initial_pose:
            return Pose.from_dict(self.config.initial_pose)
        if self.config.policy == 'expert-replay':
            return None
        radius = self.config.baseline.radius_factor * self.mesh.bounding_radius()
        return initial_poses(self.center, radius)[self.init_pose_id]

    def make_planner(self, policy):
        config = self.config
        kind = config.policy
        if kind in LEARNED_KINDS:
            if policy is None:
                if not config.checkpoint:
                    raise ConfigError('policy kind ' + kind + ' needs a checkpoint')
                policy = load_policy(config.checkpoint)
            check_policy_grid(policy.config, config.grid)
            return LearnedPlanner(policy, config, self.seed, refine=(kind == 'scandp'))

        if kind == 'expert-replay':
            trajectory = expert_trajectory(
                self.mesh, config.steps, seed=self.seed, jitter_deg=config.expert.jitter_deg,
                start_azimuth=config.expert.start_azimuth + 120.0 * self.init_pose_id,
                motion_bound=config.motion_bound, radius_factor=config.expert.radius_factor,
                clearance=config.expert.clearance)
            if self.start is None:
                self.start = trajectory[0]
                return ReplayPlanner(trajectory[1:], len(trajectory))
            return ReplayPlanner(densify(trajectory, config.motion_bound, start=self.start), len(trajectory))

        radius = config.baseline.radius_factor * self.mesh.bounding_radius()
        count = config.baseline.viewpoints
        if kind == 'random':
            lower, upper = self.mesh.bounds()
            viewpoints = random_poses(count, (self.grid.origin, self.grid.origin + self.grid.extent),
                                      self.seed, self.center,
                                      (lower - config.baseline.clearance, upper + config.baseline.clearance))
        elif kind == 'random-hemisphere':
            viewpoints = random_hemisphere(count, self.center, radius, self.seed)
        else:
            viewpoints = fibonacci_hemisphere(count, self.center, radius)
        tour = tsp_order(viewpoints, self.start)
        return ReplayPlanner(densify(tour, config.motion_bound, start=self.start), len(viewpoints))

    def observe(self, pose, step):
        """Render, perturb, back-project and integrate one scan"""
        config = self.config
        began = time.perf_counter()
        depth = render_depth(self.mesh, pose, self.camera)
        if config.noise_std > 0:
            depth = add_depth_noise(depth, config.noise_std, seed=self.seed * SEED_STRIDE + step)
        if config.depth_median_filter > 1:
            depth = median_filter_depth(depth, config.depth_median_filter)
        cloud = backproject(depth, pose, self.camera)
        self.timings['render'] += time.perf_counter() - began

        began = time.perf_counter()
        self.grid.integrate_scan(pose.translation, cloud)
        self.accumulator.add(cloud)
        self.tracker.add(cloud)
        self.timings['integrate'] += time.perf_counter() - began
        return cloud

    def constrain(self, pose):
        """Clamp into the working cube and apply the motion disturbance"""
        lower = self.grid.origin
        upper = self.grid.origin + self.grid.extent
        translation = pose.translation
        if self.config.motion_noise_std > 0:
            translation = translation + self.motion.normal(0.0, self.config.motion_noise_std, size=3)
        clipped = np.clip(translation, lower, upper)
        if not np.array_equal(clipped, translation):
            LOGGER.warning('pose %s outside the working cube, clamped', np.round(translation, 3).tolist())
        if np.array_equal(clipped, pose.translation):
            return pose
        if self.config.policy in LEARNED_KINDS:
            return pose.with_translation(clipped)
        return aim(clipped, self.center)

    def checkpoint(self, step):
        began = time.perf_counter()
        value = self.tracker.value()
        self.record.coverage.append((step, value))
        self.timings['coverage'] += time.perf_counter() - began
        LOGGER.debug('%s step %d: coverage %.4f', self.record.run_id, step, value)

    def run(self):
        """Execute all steps and return the RunRecord"""
        config = self.config
        record = self.record
        began = time.perf_counter()
        pose = self.constrain(self.start)
        history = []
        traveled = 0.0

        for step in range(config.steps):
            if history:
                traveled += float(np.linalg.norm(pose.translation - history[-1].translation))
            history.append(pose)
            record.poses.append(pose.to_dict())
            record.path_lengths.append(traveled)

            cloud = self.observe(pose, step)
            record.cloud_sizes.append(len(cloud))
            if (step + 1) % config.coverage_interval == 0 or step == config.steps - 1:
                self.checkpoint(step + 1)
            if step == config.steps - 1:
                break

            planned = time.perf_counter()
            following = self.planner.next_pose(pose, history, self.grid, record, step)
            self.timings['plan'] += time.perf_counter() - planned
            pose = self.constrain(following)

        record.steps = len(history)
        record.poses_after_opt = getattr(self.planner, 'kept', 0) or getattr(self.planner, 'viewpoints', 0)
        record.timings = {name: round(value, 4) for name, value in self.timings.items()}
        record.runtime_s = time.perf_counter() - began
        LOGGER.info('%s: coverage %.4f, path %.3f m, %d steps', record.run_id, record.coverage_final,
                    record.path_length_m, record.steps)
        return record


def check_policy_grid(policy_config, grid_config):
    """Refuse a policy trained on a different grid lattice or feature mode"""
    if not (np.isclose(policy_config.cell_size, grid_config.cell_size)
            and np.isclose(policy_config.grid_extent, grid_config.extent)):
        raise ConfigError('policy was trained on a %gm grid of %gm cells, scenario uses %gm cells over %gm'
                          % (policy_config.grid_extent, policy_config.cell_size, grid_config.cell_size,
                             grid_config.extent))
    if policy_config.thresholded != grid_config.thresholded:
        raise ConfigError('policy thresholded=%s does not match scenario grid.thresholded=%s'
                          % (policy_config.thresholded, grid_config.thresholded))


def run_id(config, seed, init_pose_id):
    """Stable identifier of a (scenario, seed, initial pose) run"""
    return '%s_%s_x%g_n%g_f%gx%g_s%d_p%d' % (
        config.policy, config.object_name, config.scale, config.noise_std,
        config.camera.model().fov_x, config.camera.model().fov_y, seed, init_pose_id)


def run_episode(config, policy=None, seed=0, init_pose_id=0, mesh=None, gt=None):
    """Run one scanning episode and return its RunRecord"""
    return Episode(config, policy, seed, init_pose_id, mesh=mesh, gt=gt).run()


def replay_path_length(record):
    """Path length recomputed from the logged poses"""
    return path_length(record.pose_list())
