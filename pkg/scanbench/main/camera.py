"""
Pinhole depth camera: ray-cast depth rendering, back-projection into the
world frame, sensor noise and the flat depth binary format.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import math
import struct
from dataclasses import dataclass

# pylint: disable=E0401
import numpy as np
from scipy.ndimage import median_filter

# pylint: disable=E0402
from .exceptions import ConfigError, FormatError, ShapeError
from .pointcloud import PointCloud
from .validators import validate_camera

INVALID_DEPTH = 0.0
DEFAULT_MAX_RANGE = 2.0

# (fov_x, fov_y) in degrees
CAMERA_PRESETS = {
    'default': (45.0, 45.0),
    'l515': (70.0, 43.0),
    'd435': (87.0, 58.0),
    'd415': (65.0, 40.0),
}


@dataclass(frozen=True)
class CameraModel:
    """Pinhole depth camera intrinsics"""
    width: int = 224
    height: int = 224
    fov_x: float = 45.0
    fov_y: float = 45.0
    max_range: float = DEFAULT_MAX_RANGE

    def __post_init__(self):
        (is_valid, error_message) = validate_camera(self.width, self.height, self.fov_x,
                                                    self.fov_y, self.max_range)
        if is_valid is False:
            raise ConfigError(error_message)

    @property
    def pixel_count(self):
        """Number of pixels per frame"""
        return self.width * self.height

    def ray_directions(self):
        """Unit camera-frame ray directions through every pixel center, row-major (h*w, 3)"""
        half_x = math.tan(math.radians(self.fov_x) / 2.0)
        half_y = math.tan(math.radians(self.fov_y) / 2.0)
        x = ((np.arange(self.width) + 0.5) / self.width * 2.0 - 1.0) * half_x
        y = ((np.arange(self.height) + 0.5) / self.height * 2.0 - 1.0) * half_y
        grid_x, grid_y = np.meshgrid(x, y)
        directions = np.stack([grid_x, grid_y, np.ones_like(grid_x)], axis=-1).reshape(-1, 3)
        return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def camera_preset(name, width=224, height=224, max_range=DEFAULT_MAX_RANGE):
    """Return a CameraModel for a named field-of-view preset"""
    if name not in CAMERA_PRESETS:
        raise ConfigError('unknown camera preset ' + repr(name) + ', choose from '
                          + ', '.join(sorted(CAMERA_PRESETS)))
    fov_x, fov_y = CAMERA_PRESETS[name]
    return CameraModel(width=width, height=height, fov_x=fov_x, fov_y=fov_y, max_range=max_range)


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Row-major range image (meters); INVALID_DEPTH marks pixels without a return"""
    values: np.ndarray
    max_range: float = DEFAULT_MAX_RANGE

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError('depth values should be 2D, got shape ' + str(values.shape))
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    @property
    def width(self):
        """Columns"""
        return self.values.shape[1]

    @property
    def height(self):
        """Rows"""
        return self.values.shape[0]

    def valid_mask(self):
        """Boolean mask of pixels holding a measurement"""
        return self.values > INVALID_DEPTH

    def valid_count(self):
        """Number of valid samples"""
        return int(self.valid_mask().sum())


def render_depth(mesh, pose, cam):
    """Ray-cast the mesh from pose. Each pixel holds the distance along its
    ray to the nearest triangle, or INVALID_DEPTH when nothing lies within max_range."""
    directions = cam.ray_directions() @ pose.rotation_matrix().T
    origins = np.broadcast_to(pose.translation, directions.shape)
    distance = mesh.intersect(origins, directions, max_range=cam.max_range)
    values = np.where(np.isfinite(distance), distance, INVALID_DEPTH)
    return DepthMap(values.reshape(cam.height, cam.width), max_range=cam.max_range)


def backproject(depth, pose, cam):
    """Turn every valid pixel into a world-frame point"""
    if depth.width != cam.width or depth.height != cam.height:
        raise ShapeError('depth map ' + str(depth.width) + 'x' + str(depth.height)
                         + ' does not match camera ' + str(cam.width) + 'x' + str(cam.height))
    ranges = depth.values.reshape(-1)
    valid = ranges > INVALID_DEPTH
    camera_points = cam.ray_directions()[valid] * ranges[valid][:, None]
    return PointCloud(pose.transform_points(camera_points))


def add_depth_noise(depth, std, seed):
    """Perturb every valid sample with zero-mean Gaussian range noise.
    Samples pushed to <= 0 or beyond max_range become invalid."""
    if std < 0:
        raise ConfigError('noise std should be >= 0, got ' + str(std))
    if std == 0:
        return DepthMap(depth.values.copy(), max_range=depth.max_range)

    generator = np.random.default_rng(seed)
    noise = generator.normal(0.0, std, size=depth.values.shape)
    valid = depth.valid_mask()
    noisy = np.where(valid, depth.values + noise, INVALID_DEPTH)
    noisy[(noisy <= 0.0) | (noisy > depth.max_range)] = INVALID_DEPTH
    return DepthMap(noisy, max_range=depth.max_range)


def median_filter_depth(depth, size=3):
    """Median-filter the valid samples; invalid pixels stay invalid"""
    if size <= 1:
        return depth
    valid = depth.valid_mask()
    # invalid pixels take part as NaN-free placeholders: fill with the global median
    fill = float(np.median(depth.values[valid])) if valid.any() else INVALID_DEPTH
    filtered = median_filter(np.where(valid, depth.values, fill), size=size, mode='nearest')
    return DepthMap(np.where(valid, filtered, INVALID_DEPTH), max_range=depth.max_range)


def depth_to_bytes(depth):
    """Serialize: u32 width, u32 height, then row-major little-endian f32 ranges"""
    header = struct.pack('<II', depth.width, depth.height)
    return header + depth.values.astype('<f4').tobytes()


def depth_from_bytes(data, max_range=DEFAULT_MAX_RANGE):
    """Inverse of depth_to_bytes"""
    if len(data) < 8:
        raise FormatError('depth stream shorter than its header')
    width, height = struct.unpack('<II', data[:8])
    expected = 8 + 4 * width * height
    if len(data) != expected:
        raise FormatError('depth stream has ' + str(len(data)) + ' bytes, expected '
                          + str(expected))
    values = np.frombuffer(data[8:], dtype='<f4').astype(np.float64).reshape(height, width)
    return DepthMap(values, max_range=max_range)
