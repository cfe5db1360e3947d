"""
Scanning policy: both conditioning encoders and the noise predictor behind
one module, plain SGD training on demonstration windows, horizon sampling
and the SDP1 checkpoint format.

SDP1 layout: magic b"SDP1", u32 header length, UTF-8 JSON header
(policy config, schedule, action normalization, training echo and the
name/shape of every weight blob), then the blobs as little-endian f32 in
header order.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import json
import logging
import struct

# pylint: disable=E0401
import numpy as np
import torch
from torch import nn

# pylint: disable=E0402
from .config import PolicyConfig, from_dict, to_dict
from .diffusion import NoisePredictor, denoise, make_schedule, noise_loss
from .encoder import (CONDITION_FEATURES, GridEncoder, PoseEncoder, batch_sparse, condition,
                      grid_to_sparse, pose_history_vector)
from .exceptions import FormatError, GeometryError, NumericalError, ShapeError
from .geometry import POSE_VECTOR_SIZE, Pose, rotation_from_6d

LOGGER = logging.getLogger(__name__)

MAGIC = b'SDP1'
LENGTH = struct.Struct('<I')
MIN_SPAN = 1e-3


class ActionNormalizer():
    """Per-dimension min-max map of action vectors onto [-1, 1]"""
    def __init__(self, low, high):
        self.low = np.asarray(low, dtype=np.float64).reshape(POSE_VECTOR_SIZE)
        self.high = np.asarray(high, dtype=np.float64).reshape(POSE_VECTOR_SIZE)
        if np.any(self.high - self.low < MIN_SPAN * 0.5):
            raise ShapeError('normalization range is degenerate')

    @classmethod
    def fit(cls, actions):
        """Fit on action vectors (..., 9); spans narrower than MIN_SPAN are widened"""
        actions = np.asarray(actions, dtype=np.float64).reshape(-1, POSE_VECTOR_SIZE)
        low = actions.min(axis=0)
        high = actions.max(axis=0)
        middle = 0.5 * (low + high)
        narrow = (high - low) < MIN_SPAN
        low[narrow] = middle[narrow] - 0.5 * MIN_SPAN
        high[narrow] = middle[narrow] + 0.5 * MIN_SPAN
        return cls(low, high)

    @classmethod
    def identity(cls):
        """Map [-1, 1] onto itself"""
        return cls(-np.ones(POSE_VECTOR_SIZE), np.ones(POSE_VECTOR_SIZE))

    def normalize(self, actions):
        return 2.0 * (np.asarray(actions) - self.low) / (self.high - self.low) - 1.0

    def denormalize(self, values):
        return (np.asarray(values) + 1.0) * 0.5 * (self.high - self.low) + self.low

    def to_dict(self):
        return {'low': self.low.tolist(), 'high': self.high.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data['low'], data['high'])


class ScanPolicy(nn.Module):
    """Grid encoder, pose encoder and noise predictor with their schedule.
    Weights are initialized from config.seed."""
    def __init__(self, config=None, normalizer=None, training=None):
        super().__init__()
        self.config = (config or PolicyConfig()).validate()
        self.normalizer = normalizer or ActionNormalizer.identity()
        self.training_echo = dict(training or {})
        self.schedule = make_schedule(self.config.diffusion_steps, self.config.beta_start,
                                      self.config.beta_end, reference_steps=self.config.reference_steps)

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(self.config.seed)
            self.grid_encoder = GridEncoder()
            self.pose_encoder = PoseEncoder(history=self.config.history)
            self.predictor = NoisePredictor(self.config.horizon, POSE_VECTOR_SIZE, CONDITION_FEATURES,
                                            hidden=tuple(self.config.hidden),
                                            embed_dim=self.config.embed_dim)

    @property
    def half_extent(self):
        """Half the working cube edge, the pose translation scale"""
        return 0.5 * self.config.grid_extent

    def conditioning(self, tensors, histories):
        """(B, 96) features for B sparse grids and (B, h*9) pose histories"""
        coordinates, features = batch_sparse(tensors)
        e_ogm = self.grid_encoder(coordinates, features, batch_size=len(tensors))
        e_cam = self.pose_encoder(torch.as_tensor(histories))
        return condition(e_cam, e_ogm)


def train_step(policy, optimizer, tensors, histories, targets, generator):
    """One SGD update on a batch of windows; return the pre-update loss.
    targets are normalized horizons (B, N, 9)."""
    if len(tensors) == 0:
        raise ShapeError('training batch is empty')
    policy.train()
    optimizer.zero_grad()
    conditioning = policy.conditioning(tensors, histories)
    loss = noise_loss(policy.schedule, policy.predictor, torch.as_tensor(targets, dtype=torch.float32),
                      conditioning, generator)
    value = loss.item()
    if not np.isfinite(value):
        raise NumericalError('training loss is ' + str(value) + '; lower the learning rate')
    loss.backward()
    optimizer.step()
    return value


def train(policy, dataset, config):
    """Run config.steps SGD updates over random minibatches; return the loss history"""
    optimizer = torch.optim.SGD(policy.parameters(), lr=config.learning_rate)
    sampler = np.random.default_rng(config.seed)
    generator = torch.Generator().manual_seed(config.seed)
    policy.training_echo = {'steps': config.steps, 'batch_size': config.batch_size,
                            'learning_rate': config.learning_rate, 'seed': config.seed,
                            'samples': len(dataset)}

    losses = []
    for step in range(1, config.steps + 1):
        indices = sampler.integers(0, len(dataset), size=min(config.batch_size, len(dataset)))
        tensors, histories, targets = dataset.batch(indices, thresholded=policy.config.thresholded)
        losses.append(train_step(policy, optimizer, tensors, histories, targets, generator))
        if config.log_every and step % config.log_every == 0:
            LOGGER.info('step %d/%d: loss %.5f', step, config.steps,
                        float(np.mean(losses[-config.log_every:])))
    return losses


def sample_actions(policy, grid, poses, generator):
    """Sample one horizon of N poses from the current grid and pose history.
    Translations are clipped to the working cube around the grid center."""
    policy.eval()
    center = grid.center()
    with torch.no_grad():
        tensor = grid_to_sparse(grid, thresholded=policy.config.thresholded)
        history = pose_history_vector(poses, policy.config.history, center, policy.half_extent)
        conditioning = policy.conditioning([tensor], history[None].astype(np.float32))
        normalized = denoise(policy.schedule, policy.predictor, conditioning, generator,
                             (1, policy.config.horizon, POSE_VECTOR_SIZE))

    actions = policy.normalizer.denormalize(normalized[0].double().numpy())
    lower = grid.origin
    upper = grid.origin + grid.extent
    horizon = []
    previous = poses[-1]
    for action in actions:
        translation = np.clip(center + action[:3], lower, upper)
        try:
            pose = Pose.from_matrix(rotation_from_6d(action[3:]), translation)
        except GeometryError:
            pose = previous.with_translation(translation)
        horizon.append(pose)
        previous = pose
    return horizon


def save_policy(policy, path):
    """Write an SDP1 checkpoint"""
    state = policy.state_dict()
    header = {
        'policy': to_dict(policy.config),
        'schedule': policy.schedule.to_dict(),
        'normalization': policy.normalizer.to_dict(),
        'training': policy.training_echo,
        'tensors': [{'name': name, 'shape': list(tensor.shape)} for name, tensor in state.items()],
    }
    encoded = json.dumps(header, sort_keys=True).encode('utf-8')
    with open(path, 'wb') as outfile:
        outfile.write(MAGIC)
        outfile.write(LENGTH.pack(len(encoded)))
        outfile.write(encoded)
        for tensor in state.values():
            outfile.write(tensor.detach().cpu().numpy().astype('<f4').tobytes())
    LOGGER.info('checkpoint written to %s', path)


def load_policy(path):
    """Read an SDP1 checkpoint"""
    with open(path, 'rb') as infile:
        data = infile.read()
    if data[:3] == MAGIC[:3] and data[:4] != MAGIC:
        raise FormatError(path + ': checkpoint version mismatch ' + repr(data[:4]))
    if data[:4] != MAGIC or len(data) < 8:
        raise FormatError(path + ': not an SDP1 checkpoint')

    (length,) = LENGTH.unpack(data[4:8])
    try:
        header = json.loads(data[8:8 + length].decode('utf-8'))
        config = from_dict(PolicyConfig, header['policy'])
        normalizer = ActionNormalizer.from_dict(header['normalization'])
        tensors = header['tensors']
    except (ValueError, KeyError, TypeError) as exception_error:
        raise FormatError(path + ': malformed checkpoint header: ' + exception_error.__str__()) from None

    policy = ScanPolicy(config, normalizer, header.get('training'))
    offset = 8 + length
    state = {}
    for entry in tensors:
        count = int(np.prod(entry['shape'], dtype=np.int64))
        blob = data[offset:offset + 4 * count]
        if len(blob) != 4 * count:
            raise FormatError(path + ': truncated weight blob ' + entry['name'])
        state[entry['name']] = torch.from_numpy(np.frombuffer(blob, dtype='<f4').astype(np.float32)
                                                .reshape(entry['shape']))
        offset += 4 * count
    if offset != len(data):
        raise FormatError(path + ': trailing bytes after weight blobs')

    try:
        policy.load_state_dict(state)
    except RuntimeError as exception_error:
        raise FormatError(path + ': weights do not match the policy shape: '
                          + exception_error.__str__()) from None
    return policy
