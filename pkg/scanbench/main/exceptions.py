"""
Exceptions raised by scanbench.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

class ScanbenchError(Exception):
    """Base Exception, to raise an unexpected
    condition in a scan, map or policy call"""
    def __init__(self, message):
        super().__init__(message)
        self.message = message

    def __str__(self):
        return str(self.message)


class ConfigError(ScanbenchError):
    """Scenario or training configuration is invalid"""


class MeshError(ScanbenchError):
    """Mesh file is missing, unreadable or empty"""
    def __init__(self, message, path=None, line_number=None):
        if path is not None and line_number is not None:
            message = str(path) + ':' + str(line_number) + ': ' + message
        elif path is not None:
            message = str(path) + ': ' + message
        super().__init__(message)
        self.path = path
        self.line_number = line_number


class FormatError(ScanbenchError):
    """Binary or text stream has a malformed header or an unsupported version"""


class ShapeError(ScanbenchError):
    """Array or weight dimensions do not match"""


class GeometryError(ScanbenchError):
    """Degenerate geometric input, e.g. a look-at direction parallel to up"""


class NumericalError(ScanbenchError):
    """NaN or Inf appeared in a loss or an intermediate result"""
