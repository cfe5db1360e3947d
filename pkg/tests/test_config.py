import json
import os

import pytest

from scanbench.main.config import (ScenarioConfig, TrainingConfig, apply_overrides, from_dict,
                                   load_json, load_scenario, load_training, parse_override, to_dict)
from scanbench.main.exceptions import ConfigError

EXAMPLE = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'scanbench', 'etc',
                       'scenario.example.json')


@pytest.fixture
def scenario(cube_path):
    return ScenarioConfig(mesh=cube_path, policy='random')


class TestOverrides:

    @pytest.mark.parametrize('text, keys, value', [
        ('steps=10', ['steps'], 10),
        ('camera.preset=l515', ['camera', 'preset'], 'l515'),
        ('grid.thresholded=true', ['grid', 'thresholded'], True),
        ('seeds=[0, 1]', ['seeds'], [0, 1]),
        ('name=a=b', ['name'], 'a=b'),
    ])
    def test_parse(self, text, keys, value):
        assert parse_override(text) == (keys, value)

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            parse_override('steps')

    def test_nested_keys_are_created(self):
        data = apply_overrides({}, ['optimizer.eta=0.05', 'optimizer.r_min=0.2'])
        assert data == {'optimizer': {'eta': 0.05, 'r_min': 0.2}}

    def test_cannot_descend_into_a_value(self):
        with pytest.raises(ConfigError):
            apply_overrides({'steps': 5}, ['steps.inner=1'])


class TestFromDict:

    def test_defaults(self):
        config = from_dict(ScenarioConfig, {})
        assert config.steps == 500
        assert config.grid.cell_size == 0.02
        assert config.camera.width == 224

    def test_nested_values(self):
        config = from_dict(ScenarioConfig, {'camera': {'preset': 'd435'}, 'optimizer': {'eta': 0.01}})
        assert config.camera.preset == 'd435'
        assert config.camera.width == 224
        assert config.optimizer.eta == 0.01

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match='camera.zoom'):
            from_dict(ScenarioConfig, {'camera': {'zoom': 2}})

    def test_nested_value_must_be_object(self):
        with pytest.raises(ConfigError):
            from_dict(ScenarioConfig, {'grid': 0.02})

    def test_round_trip(self):
        config = from_dict(ScenarioConfig, {'policy': 'expert-replay', 'seeds': [3, 4]})
        assert from_dict(ScenarioConfig, to_dict(config)) == config


class TestLoading:

    def test_example_file(self):
        config = load_scenario(EXAMPLE)
        assert config.policy == 'scandp'
        assert config.steps == 500
        assert config.optimizer.r_min == 0.1
        # relative paths resolve against the file's directory
        assert config.mesh == os.path.join(os.path.dirname(EXAMPLE), 'bunny.obj')

    def test_example_overrides(self):
        config = load_scenario(EXAMPLE, ['steps=10', 'camera.preset=l515', 'policy=random'])
        assert config.steps == 10
        assert config.camera.model().fov_x == 70.0
        assert config.policy == 'random'

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_json(str(tmp_path / 'absent.json'))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"steps": ')
        with pytest.raises(ConfigError):
            load_scenario(str(path))

    def test_training_overrides(self, tmp_path):
        path = tmp_path / 'training.json'
        path.write_text(json.dumps({'steps': 50, 'policy': {'horizon': 8}}))
        config = load_training(str(path), ['learning_rate=0.01']).validate()
        assert isinstance(config, TrainingConfig)
        assert (config.steps, config.learning_rate, config.policy.horizon) == (50, 0.01, 8)


class TestValidate:

    def test_valid(self, scenario):
        assert scenario.validate() is scenario

    def test_object_name(self, scenario):
        assert scenario.object_name == 'cube'
        scenario.name = 'bunny'
        assert scenario.object_name == 'bunny'

    @pytest.mark.parametrize('changes', [
        {'policy': 'frontier'},
        {'policy': 'scandp'},
        {'mesh': 'absent.obj'},
        {'steps': 0},
        {'coverage_epsilon': 0.0},
        {'noise_std': -0.01},
        {'seeds': []},
        {'init_pose_ids': [3]},
    ])
    def test_invalid_scenario(self, scenario, changes):
        for name, value in changes.items():
            setattr(scenario, name, value)
        with pytest.raises(ConfigError):
            scenario.validate()

    def test_invalid_grid(self, scenario):
        scenario.grid.cell_size = 0.03
        with pytest.raises(ConfigError):
            scenario.validate()

    def test_invalid_camera(self, scenario):
        scenario.camera.fov_x = 190.0
        with pytest.raises(ConfigError):
            scenario.validate()

    def test_unknown_preset(self, scenario):
        scenario.camera.preset = 'kinect'
        with pytest.raises(ConfigError):
            scenario.validate()

    def test_invalid_training(self):
        with pytest.raises(ConfigError):
            TrainingConfig(learning_rate=0.0).validate()
