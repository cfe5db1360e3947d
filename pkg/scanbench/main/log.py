"""
Logging setup shared by the command line and library modules.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import logging
import sys

LOG_FORMAT = '%(levelname).1s: %(name)s->%(message)s'


def configure(verbosity=0, stream=None):
    """Configure the scanbench root logger once.
    verbosity: -1 warnings only, 0 info, 1 debug"""
    if verbosity < 0:
        level = logging.WARNING
    elif verbosity == 0:
        level = logging.INFO
    else:
        level = logging.DEBUG

    logger = logging.getLogger('scanbench')
    logger.setLevel(level)

    # replace handlers so repeated calls (tests, suite workers) do not stack output
    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    handler = logging.StreamHandler(stream if stream is not None else sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    logger.propagate = False
    return logger
