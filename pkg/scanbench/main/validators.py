"""
Validators for scenario inputs. Each returns (is_valid, error_message).

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import math
import os


def validate_positive(name, value):
    """Validate if value is a finite number above zero"""
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        return (False, name + ' should be a number')
    if not math.isfinite(value) or value <= 0:
        return (False, name + ' should be finite and > 0, got ' + str(value))
    return (True, 'Success')


def validate_camera(width, height, fov_x, fov_y, max_range):
    """Validate camera intrinsics against the pinhole model limits"""
    for name, value in (('width', width), ('height', height)):
        if not isinstance(value, int) or value < 1:
            return (False, 'camera ' + name + ' should be an integer >= 1')
    for name, value in (('fov_x', fov_x), ('fov_y', fov_y)):
        if not 0.0 < float(value) < 180.0:
            return (False, 'camera ' + name + ' should be in (0, 180) degrees')
    return validate_positive('camera max_range', max_range)


def validate_grid(extent, cell_size):
    """Validate if extent is an integral multiple of cell_size"""
    for name, value in (('grid extent', extent), ('grid cell_size', cell_size)):
        (is_valid, error_message) = validate_positive(name, value)
        if is_valid is False:
            return (is_valid, error_message)

    ratio = extent / cell_size
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        return (False, 'grid extent/cell_size should be integral, got ' + str(ratio))
    return (True, 'Success')


def validate_probability(name, value):
    """Validate if value lies in the open interval (0, 1)"""
    if not 0.0 < float(value) < 1.0:
        return (False, name + ' should be in (0, 1), got ' + str(value))
    return (True, 'Success')


def validate_path(name, path):
    """Validate if path points to an existing file"""
    if not isinstance(path, str) or not path:
        return (False, name + ' should be a non-empty path')
    if not os.path.isfile(path):
        return (False, name + ' not found: ' + path)
    return (True, 'Success')
