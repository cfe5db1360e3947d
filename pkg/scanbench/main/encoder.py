"""
Conditioning encoders: a sparse 3D convolutional network over the active
cells of the occupancy grid and an MLP over the recent pose history.

Sparse convolution follows the generalized (stride-2) form: an output site
exists at floor(c / 2) for every active input coordinate c, and gathers the
27 inputs at 2 * o + d for d in {-1, 0, 1}^3. Nothing is computed elsewhere.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import itertools
import math
from dataclasses import dataclass

# pylint: disable=E0401
import numpy as np
import torch
from torch import nn

# pylint: disable=E0402
from .exceptions import ShapeError
from .geometry import POSE_VECTOR_SIZE, pose_to_vector

GRID_FEATURES = 64
CAMERA_FEATURES = 32
CONDITION_FEATURES = CAMERA_FEATURES + GRID_FEATURES
CHANNELS = (1, 16, 32, 64)
POSE_HIDDEN = 64

# kernel offsets, lexicographic in (di, dj, dk)
KERNEL_OFFSETS = torch.tensor(list(itertools.product((-1, 0, 1), repeat=3)), dtype=torch.long)

# thresholded ablation: probabilities are mapped to free / unknown / occupied
FREE_BELOW = 0.45
OCCUPIED_ABOVE = 0.7


@dataclass(frozen=True, eq=False)
class SparseTensor:
    """Active grid cells and their features"""
    coordinates: np.ndarray
    features: np.ndarray
    stride: int = 1

    def __post_init__(self):
        coordinates = np.asarray(self.coordinates, dtype=np.int64).reshape(-1, 3)
        features = np.asarray(self.features, dtype=np.float32)
        if features.ndim == 1:
            features = features[:, None]
        if features.shape[0] != coordinates.shape[0]:
            raise ShapeError('sparse tensor has ' + str(coordinates.shape[0]) + ' coordinates but '
                             + str(features.shape[0]) + ' feature rows')
        object.__setattr__(self, 'coordinates', coordinates)
        object.__setattr__(self, 'features', features)

    def __len__(self):
        return self.coordinates.shape[0]

    def permuted(self, order):
        """Same tensor with its coordinates enumerated in another order"""
        return SparseTensor(self.coordinates[order], self.features[order], self.stride)


def probability_features(log_odds, thresholded=False):
    """Occupancy probabilities of log-odds values, or their free/unknown/occupied levels"""
    probabilities = 1.0 / (1.0 + np.exp(-np.asarray(log_odds, dtype=np.float64)))
    if thresholded:
        probabilities = np.where(probabilities <= FREE_BELOW, 0.0,
                                 np.where(probabilities >= OCCUPIED_ABOVE, 1.0, 0.5))
    return probabilities


def grid_to_sparse(grid, thresholded=False):
    """One coordinate per cell with non-zero log-odds; feature = occupancy probability"""
    coordinates, log_odds = grid.active_cells()
    return SparseTensor(coordinates, probability_features(log_odds, thresholded))


def batch_sparse(tensors):
    """Stack sparse tensors into (batch, i, j, k) coordinates and a feature matrix"""
    coordinates = []
    features = []
    for index, tensor in enumerate(tensors):
        batch_column = np.full((len(tensor), 1), index, dtype=np.int64)
        coordinates.append(np.concatenate([batch_column, tensor.coordinates], axis=1))
        features.append(tensor.features)
    if not coordinates:
        return torch.zeros((0, 4), dtype=torch.long), torch.zeros((0, 1))
    return (torch.from_numpy(np.concatenate(coordinates)),
            torch.from_numpy(np.concatenate(features)))


def linear_keys(coordinates, span):
    """Collision-free integer keys of (batch, i, j, k) rows; spatial entries may be >= -1"""
    shifted = coordinates[:, 1:] + 1
    return ((coordinates[:, 0] * span + shifted[:, 0]) * span + shifted[:, 1]) * span + shifted[:, 2]


class SparseConv3d(nn.Module):
    """Stride-2 sparse convolution with a 3x3x3 kernel, weight shape (27, in, out)"""
    def __init__(self, in_channels, out_channels):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.weight = nn.Parameter(torch.empty(len(KERNEL_OFFSETS), in_channels, out_channels))
        self.bias = nn.Parameter(torch.empty(out_channels))
        self.reset_parameters()

    def reset_parameters(self):
        """Uniform fan-in initialization"""
        bound = 1.0 / math.sqrt(len(KERNEL_OFFSETS) * self.in_channels)
        nn.init.uniform_(self.weight, -bound, bound)
        nn.init.uniform_(self.bias, -bound, bound)

    def forward(self, coordinates, features):
        """Return the output coordinates (batch, i, j, k) and their features"""
        if features.shape[-1] != self.in_channels:
            raise ShapeError('sparse conv expects ' + str(self.in_channels) + ' input channels, got '
                             + str(features.shape[-1]))
        features = features.to(self.weight.dtype)
        if coordinates.shape[0] == 0:
            return coordinates, features.new_zeros((0, self.out_channels))

        down = torch.cat([coordinates[:, :1], torch.div(coordinates[:, 1:], 2, rounding_mode='floor')], dim=1)
        outputs = torch.unique(down, dim=0)

        span = int(max(coordinates[:, 1:].max().item(), 2 * outputs[:, 1:].max().item() + 1)) + 3
        keys = linear_keys(coordinates, span)
        sorted_keys, order = torch.sort(keys)

        result = features.new_zeros((outputs.shape[0], self.out_channels))
        for index, offset in enumerate(KERNEL_OFFSETS):
            neighbors = outputs.clone()
            neighbors[:, 1:] = 2 * outputs[:, 1:] + offset
            wanted = linear_keys(neighbors, span)
            position = torch.searchsorted(sorted_keys, wanted).clamp(max=sorted_keys.shape[0] - 1)
            found = sorted_keys[position] == wanted
            if not bool(found.any()):
                continue
            gathered = features[order[position[found]]]
            result = result.index_add(0, torch.nonzero(found).squeeze(1), gathered @ self.weight[index])
        return outputs, result + self.bias


class GridEncoder(nn.Module):
    """Three stride-2 sparse convolutions, global average pool, linear head to GRID_FEATURES"""
    def __init__(self, channels=CHANNELS, out_features=GRID_FEATURES):
        super().__init__()
        self.convs = nn.ModuleList([SparseConv3d(channels[index], channels[index + 1])
                                    for index in range(len(channels) - 1)])
        self.activation = nn.ReLU()
        self.head = nn.Linear(channels[-1], out_features)

    def forward(self, coordinates, features, batch_size=1):
        """Encode a batch of sparse grids into (batch_size, out_features)"""
        for conv in self.convs:
            coordinates, features = conv(coordinates, features)
            features = self.activation(features)

        # average over the active sites of each sample; an empty sample pools to zeros
        pooled = features.new_zeros((batch_size, features.shape[-1]))
        counts = features.new_zeros((batch_size, 1))
        if coordinates.shape[0] > 0:
            batch = coordinates[:, 0]
            pooled = pooled.index_add(0, batch, features)
            counts = counts.index_add(0, batch, features.new_ones((batch.shape[0], 1)))
        return self.head(pooled / counts.clamp(min=1.0))


class PoseEncoder(nn.Module):
    """Two-layer MLP over h flattened 9-number poses"""
    def __init__(self, history=2, hidden=POSE_HIDDEN, out_features=CAMERA_FEATURES, bias=True):
        super().__init__()
        self.history = history
        self.layers = nn.Sequential(
            nn.Linear(history * POSE_VECTOR_SIZE, hidden, bias=bias),
            nn.ReLU(),
            nn.Linear(hidden, out_features, bias=bias),
        )

    def forward(self, vectors):
        if vectors.shape[-1] != self.history * POSE_VECTOR_SIZE:
            raise ShapeError('pose encoder expects ' + str(self.history * POSE_VECTOR_SIZE)
                             + ' inputs, got ' + str(vectors.shape[-1]))
        return self.layers(vectors.to(self.layers[0].weight.dtype))


def pose_history_vector(poses, history, center, half_extent):
    """Flatten the last `history` poses into one vector, left-padding with the first pose"""
    poses = list(poses)
    if not poses:
        raise ShapeError('pose history is empty')
    padded = [poses[0]] * max(0, history - len(poses)) + poses[-history:]
    return np.concatenate([pose_to_vector(pose, center, half_extent) for pose in padded])


def encode_grid(encoder, tensor):
    """GRID_FEATURES-dim feature of one sparse grid"""
    coordinates, features = batch_sparse([tensor])
    return encoder(coordinates, features, batch_size=1)[0]


def encode_pose_history(encoder, poses, center, half_extent):
    """CAMERA_FEATURES-dim feature of the recent poses"""
    vector = pose_history_vector(poses, encoder.history, center, half_extent)
    return encoder(torch.from_numpy(vector).float())


def condition(e_cam, e_ogm):
    """Concatenate camera then grid features"""
    if e_cam.shape[-1] != CAMERA_FEATURES or e_ogm.shape[-1] != GRID_FEATURES:
        raise ShapeError('conditioning expects ' + str(CAMERA_FEATURES) + ' + ' + str(GRID_FEATURES)
                         + ' features, got ' + str(e_cam.shape[-1]) + ' + ' + str(e_ogm.shape[-1]))
    return torch.cat([e_cam, e_ogm], dim=-1)
