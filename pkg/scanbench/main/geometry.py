"""
Camera poses in SE(3): construction, look-at orientation and the
9-number (translation + 6D rotation) parameterization used by the policy.

Camera frame convention: x right, y down, z forward (optical axis).
Quaternions are stored scalar-last (x, y, z, w), as scipy does.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

from dataclasses import dataclass

# pylint: disable=E0401
import numpy as np
from scipy.spatial.transform import Rotation, Slerp

# pylint: disable=E0402
from .exceptions import GeometryError

POSE_VECTOR_SIZE = 9


@dataclass(frozen=True, eq=False)
class Pose:
    """Camera pose: world-frame translation (meters) and unit quaternion"""
    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        rotation = np.array(self.rotation, dtype=np.float64).reshape(4)
        if not np.all(np.isfinite(translation)):
            raise GeometryError('pose translation should be finite')
        norm = np.linalg.norm(rotation)
        if not np.isfinite(norm) or norm < 1e-12:
            raise GeometryError('pose rotation should be a non-zero quaternion')
        translation.flags.writeable = False
        rotation = rotation / norm
        rotation.flags.writeable = False
        object.__setattr__(self, 'translation', translation)
        object.__setattr__(self, 'rotation', rotation)

    @classmethod
    def identity(cls):
        """Return the pose at the origin looking down +z"""
        return cls(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]))

    @classmethod
    def from_matrix(cls, rotation_matrix, translation):
        """Build a pose from a 3x3 rotation matrix and a translation"""
        quaternion = Rotation.from_matrix(np.asarray(rotation_matrix, dtype=np.float64)).as_quat()
        return cls(translation, quaternion)

    def rotation_matrix(self):
        """Return the camera-to-world rotation matrix"""
        return Rotation.from_quat(self.rotation).as_matrix()

    def optical_axis(self):
        """Return the world-frame viewing direction (camera +z)"""
        return self.rotation_matrix()[:, 2]

    def transform_points(self, points):
        """Map camera-frame points (n, 3) into the world frame"""
        return np.asarray(points) @ self.rotation_matrix().T + self.translation

    def with_translation(self, translation):
        """Return a copy of this pose moved to translation"""
        return Pose(translation, self.rotation)

    def allclose(self, other, atol=1e-9):
        """Check if both poses describe the same transform (quaternion sign ignored)"""
        same_rotation = np.allclose(self.rotation, other.rotation, atol=atol) \
            or np.allclose(self.rotation, -other.rotation, atol=atol)
        return bool(np.allclose(self.translation, other.translation, atol=atol) and same_rotation)

    def to_dict(self):
        """Return a JSON-friendly representation"""
        return {'translation': self.translation.tolist(), 'rotation': self.rotation.tolist()}

    @classmethod
    def from_dict(cls, data):
        """Inverse of to_dict"""
        return cls(data['translation'], data['rotation'])


def look_at(eye, target, up=(0.0, 0.0, 1.0)):
    """Return a pose at eye whose optical axis points at target.
    The camera y axis is aligned with -up as far as possible."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)

    forward = target - eye
    distance = np.linalg.norm(forward)
    if distance < 1e-12:
        raise GeometryError('look_at: eye and target coincide')
    forward = forward / distance

    right = np.cross(forward, up)
    right_norm = np.linalg.norm(right)
    if right_norm < 1e-9 * max(1.0, np.linalg.norm(up)):
        raise GeometryError('look_at: up is parallel to the viewing direction')
    right = right / right_norm
    down = np.cross(forward, right)

    return Pose.from_matrix(np.column_stack([right, down, forward]), eye)


def aim(eye, target):
    """look_at with +z up, or +x up when the view is vertical"""
    try:
        return look_at(eye, target)
    except GeometryError:
        return look_at(eye, target, up=(1.0, 0.0, 0.0))


def rotation_to_6d(rotation_matrix):
    """First two columns of a rotation matrix, flattened column-wise"""
    rotation_matrix = np.asarray(rotation_matrix)
    return np.concatenate([rotation_matrix[..., :, 0], rotation_matrix[..., :, 1]], axis=-1)


def rotation_from_6d(values):
    """Gram-Schmidt a 6-vector back into a rotation matrix"""
    values = np.asarray(values, dtype=np.float64)
    first = values[:3]
    second = values[3:6]

    norm = np.linalg.norm(first)
    if norm < 1e-12:
        raise GeometryError('6D rotation has a zero first column')
    first = first / norm
    second = second - np.dot(first, second) * first
    norm = np.linalg.norm(second)
    if norm < 1e-12:
        raise GeometryError('6D rotation columns are parallel')
    second = second / norm
    third = np.cross(first, second)
    return np.column_stack([first, second, third])


def pose_to_vector(pose, center, half_extent):
    """Encode a pose as 9 numbers: translation scaled into [-1, 1] over the
    working cube plus the 6D rotation"""
    translation = (pose.translation - np.asarray(center)) / half_extent
    return np.concatenate([translation, rotation_to_6d(pose.rotation_matrix())])


def pose_from_vector(vector, center, half_extent):
    """Inverse of pose_to_vector; the rotation is re-orthonormalized"""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (POSE_VECTOR_SIZE,):
        raise GeometryError('pose vector should have 9 entries, got ' + str(vector.shape))
    translation = vector[:3] * half_extent + np.asarray(center)
    return Pose.from_matrix(rotation_from_6d(vector[3:]), translation)


def slerp_rotation(first, second, fraction):
    """Spherically interpolate between two pose orientations"""
    rotations = Rotation.from_quat(np.stack([first.rotation, second.rotation]))
    return Slerp([0.0, 1.0], rotations)([float(np.clip(fraction, 0.0, 1.0))]).as_quat()[0]


def interpolate_pose(first, second, fraction):
    """Linear translation, spherical orientation interpolation between two poses"""
    fraction = float(np.clip(fraction, 0.0, 1.0))
    translation = (1.0 - fraction) * first.translation + fraction * second.translation
    return Pose(translation, slerp_rotation(first, second, fraction))
