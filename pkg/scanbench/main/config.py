"""
Scenario and training configuration: dataclasses with defaults, loading
from one JSON file and dotted key=value overrides.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import dataclasses
import json
import os
from dataclasses import dataclass, field

# pylint: disable=E0402
from .camera import CAMERA_PRESETS, DEFAULT_MAX_RANGE, CameraModel
from .exceptions import ConfigError
from .validators import (validate_grid, validate_path, validate_positive,
                         validate_probability)

POLICY_KINDS = ('scandp', 'scandp-no-opt', 'random', 'random-hemisphere',
                'uniform-hemisphere', 'expert-replay')
LEARNED_KINDS = ('scandp', 'scandp-no-opt')


def check(result):
    """Raise ConfigError for a failed (is_valid, error_message) pair"""
    (is_valid, error_message) = result
    if is_valid is False:
        raise ConfigError(error_message)


@dataclass
class CameraConfig:
    """Depth camera; explicit fov values win over the preset"""
    preset: str = 'default'
    width: int = 224
    height: int = 224
    fov_x: float = None
    fov_y: float = None
    max_range: float = DEFAULT_MAX_RANGE

    def model(self):
        """Build the CameraModel"""
        if self.preset not in CAMERA_PRESETS:
            raise ConfigError('unknown camera preset ' + repr(self.preset))
        preset_x, preset_y = CAMERA_PRESETS[self.preset]
        return CameraModel(
            width=self.width,
            height=self.height,
            fov_x=preset_x if self.fov_x is None else self.fov_x,
            fov_y=preset_y if self.fov_y is None else self.fov_y,
            max_range=self.max_range,
        )


@dataclass
class GridConfig:
    """Working cube centered on the object"""
    extent: float = 0.8
    cell_size: float = 0.02
    kappa_occ: float = 0.9
    thresholded: bool = False


@dataclass
class OptimizerConfig:
    """Horizon refinement"""
    r_min: float = 0.1
    eta: float = 0.02


@dataclass
class BaselineConfig:
    """Non-learned planners"""
    viewpoints: int = 60
    radius_factor: float = 1.4
    clearance: float = 0.1


@dataclass
class ExpertConfig:
    """Scripted orbit"""
    jitter_deg: float = 2.0
    start_azimuth: float = 0.0
    radius_factor: float = 1.4
    clearance: float = 0.1


@dataclass
class PolicyConfig:
    """Network shapes, schedule and observation geometry of a policy"""
    horizon: int = 16
    history: int = 2
    diffusion_steps: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.02
    reference_steps: int = 1000
    hidden: list = field(default_factory=lambda: [256, 256, 256])
    embed_dim: int = 128
    grid_extent: float = 0.8
    cell_size: float = 0.02
    thresholded: bool = False
    seed: int = 0

    def validate(self):
        """Check shapes and grid geometry"""
        check(validate_positive('horizon', self.horizon))
        check(validate_positive('history', self.history))
        check(validate_positive('diffusion_steps', self.diffusion_steps))
        check(validate_grid(self.grid_extent, self.cell_size))
        return self


@dataclass
class TrainingConfig:
    """Plain SGD training run"""
    steps: int = 20000
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    log_every: int = 500
    policy: PolicyConfig = field(default_factory=PolicyConfig)

    def validate(self):
        """Check the training loop parameters"""
        check(validate_positive('steps', self.steps))
        check(validate_positive('batch_size', self.batch_size))
        check(validate_positive('learning_rate', self.learning_rate))
        self.policy.validate()
        return self


@dataclass
class ScenarioConfig:
    """One scanning scenario: object, sensor, planner and metric parameters"""
    mesh: str = ''
    scale: float = 1.0
    name: str = ''
    policy: str = 'scandp'
    checkpoint: str = ''
    steps: int = 500
    noise_std: float = 0.0
    depth_median_filter: int = 0
    motion_noise_std: float = 0.0
    motion_bound: float = 0.05
    coverage_epsilon: float = 0.01
    downsample_voxel: float = 0.005
    coverage_interval: int = 25
    gt_radius: float = 0.004
    seeds: list = field(default_factory=lambda: [0])
    init_pose_ids: list = field(default_factory=lambda: [0, 1, 2])
    initial_pose: dict = None
    camera: CameraConfig = field(default_factory=CameraConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    expert: ExpertConfig = field(default_factory=ExpertConfig)

    @property
    def object_name(self):
        """Object id used in result rows"""
        if self.name:
            return self.name
        return os.path.splitext(os.path.basename(self.mesh))[0]

    def validate(self):
        """Check invariants; raise ConfigError on the first violation"""
        if self.policy not in POLICY_KINDS:
            raise ConfigError('unknown policy kind ' + repr(self.policy) + ', choose from '
                              + ', '.join(POLICY_KINDS))
        check(validate_path('mesh', self.mesh))
        if self.policy in LEARNED_KINDS:
            check(validate_path('checkpoint', self.checkpoint))

        check(validate_positive('steps', self.steps))
        check(validate_positive('scale', self.scale))
        check(validate_positive('coverage_epsilon', self.coverage_epsilon))
        check(validate_positive('downsample_voxel', self.downsample_voxel))
        check(validate_positive('coverage_interval', self.coverage_interval))
        check(validate_positive('motion_bound', self.motion_bound))
        check(validate_positive('gt_radius', self.gt_radius))
        check(validate_positive('baseline.viewpoints', self.baseline.viewpoints))
        check(validate_positive('optimizer.r_min', self.optimizer.r_min))
        check(validate_grid(self.grid.extent, self.grid.cell_size))
        check(validate_probability('grid.kappa_occ', self.grid.kappa_occ))

        if self.noise_std < 0 or self.motion_noise_std < 0 or self.optimizer.eta < 0:
            raise ConfigError('noise_std, motion_noise_std and optimizer.eta should be >= 0')
        if not self.seeds:
            raise ConfigError('seeds should not be empty')
        if not self.init_pose_ids or any(pose_id not in (0, 1, 2) for pose_id in self.init_pose_ids):
            raise ConfigError('init_pose_ids should be a non-empty subset of 0, 1, 2')
        self.camera.model()
        return self


def from_dict(cls, data, prefix=''):
    """Build a (nested) config dataclass from a dict, rejecting unknown keys"""
    if not isinstance(data, dict):
        raise ConfigError(prefix.rstrip('.') + ' should be an object')
    known = {item.name: item for item in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError('unknown config key ' + prefix + unknown[0])

    values = {}
    for name, value in data.items():
        default = known[name].default_factory() if known[name].default_factory is not dataclasses.MISSING \
            else known[name].default
        if dataclasses.is_dataclass(default):
            value = from_dict(type(default), value, prefix + name + '.')
        values[name] = value
    return cls(**values)


def to_dict(config):
    """Plain dict of a config dataclass"""
    return dataclasses.asdict(config)


def parse_override(text):
    """Split "a.b=value"; the value is parsed as JSON when possible"""
    if '=' not in text:
        raise ConfigError('override should look like key=value, got ' + repr(text))
    key, raw = text.split('=', 1)
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    return key.strip().split('.'), value


def apply_overrides(data, overrides):
    """Set dotted keys in a nested dict"""
    for text in overrides or ():
        keys, value = parse_override(text)
        node = data
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError('cannot override inside non-object key ' + key)
        node[keys[-1]] = value
    return data


def load_json(path):
    """Read a JSON config file"""
    check(validate_path('config', path))
    try:
        with open(path, 'r') as infile:
            return json.load(infile)
    except ValueError as exception_error:
        raise ConfigError(path + ': ' + exception_error.__str__()) from None


def load_scenario(path=None, overrides=()):
    """ScenarioConfig from a JSON file (or defaults) plus overrides; mesh and
    checkpoint paths are resolved against the file's directory"""
    data = load_json(path) if path else {}
    data = apply_overrides(data, overrides)
    config = from_dict(ScenarioConfig, data)
    if path:
        base = os.path.dirname(os.path.abspath(path))
        for name in ('mesh', 'checkpoint'):
            value = getattr(config, name)
            if value and not os.path.isabs(value) and not os.path.exists(value):
                setattr(config, name, os.path.join(base, value))
    return config


def load_training(path=None, overrides=()):
    """TrainingConfig from a JSON file (or defaults) plus overrides"""
    data = load_json(path) if path else {}
    return from_dict(TrainingConfig, apply_overrides(data, overrides))
