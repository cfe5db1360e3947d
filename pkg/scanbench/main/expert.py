"""
Scripted scanning expert that stands in for human demonstrations, and the
on-disk demonstration layout (poses.json plus one depth binary per step).

The orbit circles the object once in an upper elevation band, crosses to a
lower band along one meridian and circles again. The crossing happens at an
axis-aligned azimuth on a slightly larger sphere, so the camera stays out of
the object's bounding box inflated by the clearance.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field

# pylint: disable=E0401
import numpy as np

# pylint: disable=E0402
from .camera import CameraModel, add_depth_noise, depth_from_bytes, depth_to_bytes, render_depth
from .exceptions import ConfigError, FormatError
from .geometry import Pose, look_at

LOGGER = logging.getLogger(__name__)

BAND_ELEVATION = 55.0
RAMP_FRACTION = 0.1
RAMP_MARGIN = 1.08
POSE_LOG = 'poses.json'


@dataclass
class Demonstration:
    """Ordered (pose, depth) observations of one object"""
    poses: list
    depths: list
    camera: CameraModel
    center: np.ndarray
    object_id: str = 'object'
    seed: int = 0
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.poses)


def orbit_angles(steps, start_azimuth):
    """Nominal (azimuth, elevation) in degrees and an on-ramp flag per step"""
    ramp = min(steps, max(1, int(round(RAMP_FRACTION * steps))))
    first = (steps - ramp) // 2
    second = steps - ramp - first

    # the crossing azimuth is the first multiple of 90 degrees after one full turn
    crossing = 90.0 * math.ceil((start_azimuth + 360.0) / 90.0)
    azimuth = np.concatenate([
        np.linspace(start_azimuth, crossing, first, endpoint=False),
        np.full(ramp, crossing),
        crossing + np.linspace(0.0, 360.0, second),
    ])
    elevation = np.concatenate([
        np.full(first, BAND_ELEVATION),
        np.linspace(BAND_ELEVATION, -BAND_ELEVATION, ramp),
        np.full(second, -BAND_ELEVATION),
    ])
    on_ramp = np.zeros(steps, dtype=bool)
    on_ramp[first:first + ramp] = True
    return azimuth, elevation, on_ramp


def clamp_steps(points, motion_bound):
    """Limit consecutive displacements to motion_bound, in order"""
    clamped = points.copy()
    for index in range(1, clamped.shape[0]):
        offset = clamped[index] - clamped[index - 1]
        distance = np.linalg.norm(offset)
        if distance > motion_bound:
            clamped[index] = clamped[index - 1] + offset * (motion_bound / distance)
    return clamped


def expert_trajectory(mesh, steps, seed=0, jitter_deg=2.0, start_azimuth=0.0, motion_bound=0.05,
                      radius_factor=1.4, clearance=0.1):
    """Look-at poses of the scripted orbit. Per-step angular jitter is
    N(0, jitter_deg) clipped to two standard deviations."""
    if steps < 1:
        raise ConfigError('expert steps should be >= 1, got ' + str(steps))
    center = mesh.center()
    lower, upper = mesh.bounds()
    radius = radius_factor * mesh.bounding_radius()
    crossing_radius = max(radius, math.sqrt(2.0) * (0.5 * float((upper - lower).max()) + clearance)
                          * RAMP_MARGIN)

    azimuth, elevation, on_ramp = orbit_angles(steps, start_azimuth)
    if jitter_deg > 0:
        generator = np.random.default_rng(seed)
        jitter = np.clip(generator.normal(0.0, jitter_deg, size=(steps, 2)),
                         -2.0 * jitter_deg, 2.0 * jitter_deg)
        azimuth = azimuth + jitter[:, 0]
        elevation = elevation + jitter[:, 1]

    radii = np.where(on_ramp, crossing_radius, radius)
    azimuth = np.radians(azimuth)
    elevation = np.radians(elevation)
    eyes = center + radii[:, None] * np.stack([np.cos(elevation) * np.cos(azimuth),
                                               np.cos(elevation) * np.sin(azimuth),
                                               np.sin(elevation)], axis=1)
    eyes = clamp_steps(eyes, motion_bound)
    return [look_at(eye, center) for eye in eyes]


def generate_expert_demo(mesh, cam, seed, steps, min_steps=1, noise_std=0.0, **orbit):
    """Render a depth map at every pose of the scripted orbit"""
    if steps < min_steps:
        raise ConfigError('demonstration needs at least ' + str(min_steps) + ' steps, got '
                          + str(steps))
    poses = expert_trajectory(mesh, steps, seed=seed, **orbit)
    depths = []
    for index, pose in enumerate(poses):
        depth = render_depth(mesh, pose, cam)
        if noise_std > 0:
            depth = add_depth_noise(depth, noise_std, seed=seed * 1000003 + index)
        depths.append(depth)
    LOGGER.info('expert demo %s seed %d: %d steps', mesh.name, seed, steps)
    return Demonstration(poses=poses, depths=depths, camera=cam, center=mesh.center(),
                         object_id=mesh.name, seed=seed, metadata=dict(orbit, noise_std=noise_std))


def save_demo(demo, directory):
    """Write poses.json and depth_NNNN.bin files into directory"""
    os.makedirs(directory, exist_ok=True)
    log = {
        'object': demo.object_id,
        'seed': demo.seed,
        'center': np.asarray(demo.center).tolist(),
        'camera': {'width': demo.camera.width, 'height': demo.camera.height, 'fov_x': demo.camera.fov_x,
                   'fov_y': demo.camera.fov_y, 'max_range': demo.camera.max_range},
        'metadata': demo.metadata,
        'poses': [pose.to_dict() for pose in demo.poses],
    }
    with open(os.path.join(directory, POSE_LOG), 'w') as outfile:
        json.dump(log, outfile, indent=1)
    for index, depth in enumerate(demo.depths):
        with open(os.path.join(directory, 'depth_%04d.bin' % index), 'wb') as outfile:
            outfile.write(depth_to_bytes(depth))


def load_demo(directory):
    """Inverse of save_demo"""
    path = os.path.join(directory, POSE_LOG)
    if not os.path.isfile(path):
        raise FormatError(directory + ': missing ' + POSE_LOG)
    try:
        with open(path, 'r') as infile:
            log = json.load(infile)
        camera = CameraModel(**log['camera'])
        poses = [Pose.from_dict(entry) for entry in log['poses']]
    except (ValueError, KeyError, TypeError) as exception_error:
        raise FormatError(path + ': ' + exception_error.__str__()) from None

    depths = []
    for index in range(len(poses)):
        with open(os.path.join(directory, 'depth_%04d.bin' % index), 'rb') as infile:
            depths.append(depth_from_bytes(infile.read(), max_range=camera.max_range))
    return Demonstration(poses=poses, depths=depths, camera=camera, center=np.array(log['center']),
                         object_id=log.get('object', 'object'), seed=log.get('seed', 0),
                         metadata=log.get('metadata', {}))
