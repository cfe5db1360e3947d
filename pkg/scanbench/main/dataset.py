"""
Training windows from demonstrations. Each window holds the occupancy grid
built from every earlier scan, the last h poses and the next N poses.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import logging

# pylint: disable=E0401
import numpy as np

# pylint: disable=E0402
from .camera import backproject
from .encoder import SparseTensor, pose_history_vector, probability_features
from .exceptions import ConfigError
from .geometry import pose_to_vector
from .occupancy import new_grid
from .policy import ActionNormalizer

LOGGER = logging.getLogger(__name__)


def action_vector(pose, center):
    """Action parameterization: translation relative to the grid center plus 6D rotation"""
    return pose_to_vector(pose, center, 1.0)


class DemoDataset():
    """Grid snapshots (int16 coordinates, f32 log-odds), flattened pose
    histories (S, h*9) and raw target horizons (S, N, 9)"""
    def __init__(self, coordinates, log_odds, histories, targets, normalizer):
        self.coordinates = coordinates
        self.log_odds = log_odds
        self.histories = histories
        self.targets = targets
        self.normalizer = normalizer

    def __len__(self):
        return self.targets.shape[0]

    def sparse(self, index, thresholded=False):
        """Encoder input of one window"""
        return SparseTensor(self.coordinates[index].astype(np.int64),
                            probability_features(self.log_odds[index], thresholded))

    def batch(self, indices, thresholded=False):
        """(sparse tensors, histories (B, h*9) f32, normalized targets (B, N, 9) f32)"""
        tensors = [self.sparse(index, thresholded) for index in indices]
        histories = self.histories[indices]
        targets = self.normalizer.normalize(self.targets[indices]).astype(np.float32)
        return tensors, histories, targets


def build_dataset(demos, horizon=16, history=2, extent=0.8, cell_size=0.02):
    """Sliding windows t = h .. T - N over every demonstration, T - N - h + 1 per demo.
    The grid of window t integrates scans 0 .. t - 1."""
    coordinates = []
    log_odds = []
    histories = []
    targets = []
    half_extent = 0.5 * extent

    for demo in demos:
        steps = len(demo)
        if steps < horizon + history:
            raise ConfigError('demonstration ' + demo.object_id + ' has ' + str(steps)
                              + ' steps, needs at least ' + str(horizon + history))
        center = np.asarray(demo.center, dtype=np.float64)
        grid = new_grid(center - half_extent, extent, cell_size)
        actions = np.array([action_vector(pose, center) for pose in demo.poses])

        for t in range(steps - horizon + 1):
            if t >= history:
                cells, values = grid.active_cells()
                coordinates.append(cells.astype(np.int16))
                log_odds.append(values.astype(np.float32))
                histories.append(pose_history_vector(demo.poses[:t], history, center, half_extent))
                targets.append(actions[t:t + horizon])
            pose = demo.poses[t]
            grid.integrate_scan(pose.translation, backproject(demo.depths[t], pose, demo.camera))
        LOGGER.debug('demo %s seed %d: %d windows', demo.object_id, demo.seed, steps - horizon - history + 1)

    if not targets:
        raise ConfigError('no demonstrations to build a dataset from')
    targets = np.array(targets)
    normalizer = ActionNormalizer.fit(targets)
    LOGGER.info('dataset: %d windows from %d demonstrations', targets.shape[0], len(demos))
    return DemoDataset(coordinates, log_odds, np.array(histories, dtype=np.float32), targets, normalizer)
