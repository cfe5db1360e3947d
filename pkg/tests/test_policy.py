import numpy as np
import pytest
import torch

from scanbench.main.config import PolicyConfig
from scanbench.main.diffusion import noise_loss
from scanbench.main.encoder import SparseTensor
from scanbench.main.exceptions import FormatError, ShapeError
from scanbench.main.geometry import look_at
from scanbench.main.policy import (ActionNormalizer, ScanPolicy, load_policy, sample_actions,
                                   save_policy, train_step)


def small_config(seed=0):
    return PolicyConfig(horizon=4, history=2, diffusion_steps=5, hidden=[32, 32], embed_dim=16, seed=seed)


def random_batch(size, seed=0):
    generator = np.random.default_rng(seed)
    tensors = []
    for _ in range(size):
        coordinates = np.unique(generator.integers(0, 40, (30, 3)), axis=0)
        tensors.append(SparseTensor(coordinates, generator.uniform(0.1, 0.9, coordinates.shape[0])))
    histories = generator.uniform(-1.0, 1.0, (size, 18)).astype(np.float32)
    targets = generator.uniform(-1.0, 1.0, (size, 4, 9)).astype(np.float32)
    return tensors, histories, targets


@pytest.fixture
def policy():
    return ScanPolicy(small_config())


@pytest.fixture
def history():
    return [look_at([0.3, 0.0, 0.2], [0.0, 0.0, 0.0]), look_at([0.28, 0.05, 0.2], [0.0, 0.0, 0.0])]


class TestActionNormalizer:

    def test_fit_maps_range_to_unit_interval(self):
        actions = np.random.default_rng(0).uniform(-0.3, 0.5, (20, 4, 9))
        normalizer = ActionNormalizer.fit(actions)
        normalized = normalizer.normalize(actions)
        assert np.allclose(normalized.reshape(-1, 9).min(axis=0), -1.0)
        assert np.allclose(normalized.reshape(-1, 9).max(axis=0), 1.0)
        assert np.allclose(normalizer.denormalize(normalized), actions)

    def test_constant_dimension_is_widened(self):
        actions = np.zeros((5, 9))
        actions[:, 0] = np.linspace(0.0, 1.0, 5)
        normalizer = ActionNormalizer.fit(actions)
        assert np.all(normalizer.high - normalizer.low > 0.0)
        assert np.allclose(normalizer.normalize(actions)[:, 1:], 0.0)

    def test_identity(self):
        values = np.linspace(-1.0, 1.0, 9)
        assert np.allclose(ActionNormalizer.identity().normalize(values), values)

    def test_dict_round_trip(self):
        normalizer = ActionNormalizer.fit(np.random.default_rng(1).normal(size=(10, 9)))
        restored = ActionNormalizer.from_dict(normalizer.to_dict())
        assert np.array_equal(restored.low, normalizer.low)
        assert np.array_equal(restored.high, normalizer.high)

    def test_degenerate_range(self):
        with pytest.raises(ShapeError):
            ActionNormalizer(np.zeros(9), np.zeros(9))


class TestScanPolicy:

    def test_weights_follow_seed(self):
        first = ScanPolicy(small_config(seed=3)).state_dict()
        second = ScanPolicy(small_config(seed=3)).state_dict()
        third = ScanPolicy(small_config(seed=4)).state_dict()
        assert all(torch.equal(first[name], second[name]) for name in first)
        assert not all(torch.equal(first[name], third[name]) for name in first)

    def test_seed_does_not_touch_global_stream(self):
        torch.manual_seed(11)
        expected = torch.rand(3)
        torch.manual_seed(11)
        ScanPolicy(small_config())
        assert torch.equal(torch.rand(3), expected)

    def test_conditioning_shape(self, policy):
        tensors, histories, _ = random_batch(3)
        assert policy.conditioning(tensors, histories).shape == (3, 96)

    def test_half_extent(self, policy):
        assert policy.half_extent == pytest.approx(0.4)


class TestTrainStep:

    def test_returns_pre_update_loss(self, policy):
        tensors, histories, targets = random_batch(4)
        expected = noise_loss(policy.schedule, policy.predictor, torch.as_tensor(targets),
                              policy.conditioning(tensors, histories),
                              torch.Generator().manual_seed(3)).item()
        optimizer = torch.optim.SGD(policy.parameters(), lr=1e-3)
        value = train_step(policy, optimizer, tensors, histories, targets, torch.Generator().manual_seed(3))
        assert value == pytest.approx(expected, rel=1e-5)

    def test_updates_every_module(self, policy):
        before = {name: tensor.clone() for name, tensor in policy.state_dict().items()}
        optimizer = torch.optim.SGD(policy.parameters(), lr=1e-2)
        train_step(policy, optimizer, *random_batch(4), torch.Generator().manual_seed(0))
        after = policy.state_dict()
        for prefix in ('grid_encoder', 'pose_encoder', 'predictor'):
            names = [name for name in after if name.startswith(prefix)]
            assert any(not torch.equal(before[name], after[name]) for name in names)

    def test_loss_decreases_on_frozen_batch(self, policy):
        batch = random_batch(8, seed=5)
        optimizer = torch.optim.SGD(policy.parameters(), lr=0.01)
        losses = [train_step(policy, optimizer, *batch, torch.Generator().manual_seed(0)) for _ in range(200)]
        assert np.mean(losses[-20:]) < np.mean(losses[:20])

    def test_empty_batch(self, policy):
        optimizer = torch.optim.SGD(policy.parameters(), lr=1e-3)
        with pytest.raises(ShapeError):
            train_step(policy, optimizer, [], np.zeros((0, 18)), np.zeros((0, 4, 9)), None)


class TestSampleActions:

    def test_horizon_shape_and_validity(self, policy, grid, history):
        grid.cells.update({(20, 20, k): 2.0 for k in range(15, 25)})
        horizon = sample_actions(policy, grid, history, torch.Generator().manual_seed(0))
        assert len(horizon) == 4
        for pose in horizon:
            rotation = pose.rotation_matrix()
            assert np.allclose(rotation @ rotation.T, np.eye(3), atol=1e-6)
            assert np.linalg.det(rotation) == pytest.approx(1.0, abs=1e-6)
            assert np.all(pose.translation >= grid.origin - 1e-9)
            assert np.all(pose.translation <= grid.origin + grid.extent + 1e-9)

    def test_deterministic_per_seed(self, policy, grid, history):
        first = sample_actions(policy, grid, history, torch.Generator().manual_seed(7))
        second = sample_actions(policy, grid, history, torch.Generator().manual_seed(7))
        assert all(a.allclose(b) for a, b in zip(first, second))

    def test_single_pose_history(self, policy, grid, history):
        horizon = sample_actions(policy, grid, history[:1], torch.Generator().manual_seed(0))
        assert len(horizon) == 4


class TestCheckpoint:

    @pytest.fixture
    def checkpoint(self, tmp_path, policy):
        path = str(tmp_path / 'policy.sdp')
        policy.normalizer = ActionNormalizer.fit(np.random.default_rng(2).uniform(-0.4, 0.4, (8, 4, 9)))
        save_policy(policy, path)
        return path

    def test_round_trip(self, checkpoint, policy, grid, history):
        restored = load_policy(checkpoint)
        assert restored.config == policy.config
        assert np.array_equal(restored.normalizer.low, policy.normalizer.low)
        state = restored.state_dict()
        assert all(torch.equal(state[name], tensor) for name, tensor in policy.state_dict().items())

        first = sample_actions(policy, grid, history, torch.Generator().manual_seed(1))
        second = sample_actions(restored, grid, history, torch.Generator().manual_seed(1))
        assert all(a.allclose(b) for a, b in zip(first, second))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / 'bad.sdp'
        path.write_bytes(b'XXXX' + bytes(16))
        with pytest.raises(FormatError):
            load_policy(str(path))

    def test_version_mismatch(self, checkpoint):
        with open(checkpoint, 'rb') as infile:
            data = infile.read()
        with open(checkpoint, 'wb') as outfile:
            outfile.write(b'SDP2' + data[4:])
        with pytest.raises(FormatError, match='version mismatch'):
            load_policy(checkpoint)

    def test_truncated(self, checkpoint):
        with open(checkpoint, 'rb') as infile:
            data = infile.read()
        with open(checkpoint, 'wb') as outfile:
            outfile.write(data[:-4])
        with pytest.raises(FormatError):
            load_policy(checkpoint)

    def test_trailing_bytes(self, checkpoint):
        with open(checkpoint, 'ab') as outfile:
            outfile.write(b'\x00')
        with pytest.raises(FormatError):
            load_policy(checkpoint)
