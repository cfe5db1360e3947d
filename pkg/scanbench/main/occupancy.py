"""
Probabilistic occupancy grid: log-odds fusion of depth scans along 3D
line traversals, probability queries and the OGM1 binary format.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import math
import struct
from dataclasses import dataclass
from typing import NamedTuple

# pylint: disable=E0401
import numpy as np

# pylint: disable=E0402
from .exceptions import ConfigError, FormatError
from .validators import validate_grid, validate_probability

LOG_ODDS_HIT = 0.85
LOG_ODDS_MISS = -0.4
LOG_ODDS_MIN = -2.0
LOG_ODDS_MAX = 3.5

MAGIC = b'OGM1'
HEADER = struct.Struct('<4s3dddQ')
RECORD = np.dtype([('i', '<i4'), ('j', '<i4'), ('k', '<i4'), ('log_odds', '<f4')])

# keeps values that land exactly on a cell boundary in the upper cell
BOUNDARY_NUDGE = 1e-9


class CellIndex(NamedTuple):
    """Integer cell coordinates"""
    i: int
    j: int
    k: int


@dataclass(frozen=True)
class UpdateSummary:
    """Cells touched by one integrate_scan call"""
    hit_count: int
    miss_count: int


def logistic(log_odds):
    """Occupancy probability for a log-odds value"""
    return 1.0 / (1.0 + math.exp(-log_odds))


class OccupancyGrid():
    """Sparse log-odds voxel map over a cube. Absent cells hold the prior (L = 0, p = 0.5)."""
    def __init__(self, origin, extent, cell_size):
        (is_valid, error_message) = validate_grid(extent, cell_size)
        if is_valid is False:
            raise ConfigError(error_message)

        self.origin = np.array(origin, dtype=np.float64).reshape(3)
        self.extent = float(extent)
        self.cell_size = float(cell_size)
        self.dims = int(round(self.extent / self.cell_size))
        self.cells = {}

    def __len__(self):
        return len(self.cells)

    @property
    def shape(self):
        """Addressable cells per axis"""
        return (self.dims, self.dims, self.dims)

    def center(self):
        """World-frame center of the cube"""
        return self.origin + 0.5 * self.extent

    def copy(self):
        """Independent snapshot of this grid"""
        other = OccupancyGrid(self.origin, self.extent, self.cell_size)
        other.cells = dict(self.cells)
        return other

    def in_bounds(self, index):
        """Check if a cell index addresses storage in this grid"""
        return all(0 <= value < self.dims for value in index)

    def world_to_cells(self, points):
        """Floor-bin world points (n, 3); return integer indices and an in-bounds mask"""
        scaled = (np.asarray(points, dtype=np.float64).reshape(-1, 3) - self.origin) / self.cell_size
        indices = np.floor(scaled + BOUNDARY_NUDGE).astype(np.int64)
        inside = np.all((indices >= 0) & (indices < self.dims), axis=1)
        return indices, inside

    def world_to_cell(self, point):
        """Cell containing a world point. Out-of-bounds indices are returned as is;
        check them with in_bounds."""
        indices, _ = self.world_to_cells(point)
        return CellIndex(*(int(value) for value in indices[0]))

    def cell_center(self, index):
        """World-frame center of a cell"""
        return self.origin + (np.asarray(index, dtype=np.float64) + 0.5) * self.cell_size

    def log_odds(self, index):
        """Stored log-odds of a cell, 0 when absent"""
        return self.cells.get(tuple(int(value) for value in index), 0.0)

    def probability_of(self, index):
        """Occupancy probability of a cell"""
        return logistic(self.log_odds(index))

    def occupied_cells(self, kappa_occ=0.9):
        """Cells whose occupancy probability is at least kappa_occ"""
        (is_valid, error_message) = validate_probability('kappa_occ', kappa_occ)
        if is_valid is False:
            raise ConfigError(error_message)
        return {CellIndex(*key) for key, value in self.cells.items() if logistic(value) >= kappa_occ}

    def occupied_centers(self, kappa_occ=0.9):
        """World-frame centers of the occupied cells, shape (n, 3)"""
        occupied = sorted(self.occupied_cells(kappa_occ))
        if not occupied:
            return np.zeros((0, 3))
        return self.cell_center(np.array(occupied))

    def active_cells(self):
        """Cells with non-zero log-odds in lexicographic order: (indices (n, 3), log-odds (n,))"""
        keys = sorted(key for key, value in self.cells.items() if value != 0.0)
        if not keys:
            return np.zeros((0, 3), dtype=np.int64), np.zeros(0)
        return np.array(keys, dtype=np.int64), np.array([self.cells[key] for key in keys])

    def bresenham3d(self, a, b):
        """Cells on the 26-connected line from the cell of a to the cell of b"""
        start, _ = self.world_to_cells(a)
        end, _ = self.world_to_cells(b)
        cells, _ = traverse(start, end)
        return [CellIndex(*row) for row in cells.tolist()]

    def integrate_scan(self, camera_center, cloud):
        """Fuse one scan. The cell of every point gets a hit, cells strictly between
        the camera cell and it get a miss; within one scan each cell is updated once
        and a hit wins over a miss. Out-of-bounds cells are skipped."""
        points = cloud.points if hasattr(cloud, 'points') else np.asarray(cloud).reshape(-1, 3)
        if points.shape[0] == 0:
            return UpdateSummary(0, 0)

        start, _ = self.world_to_cells(camera_center)
        end, _ = self.world_to_cells(points)
        start = np.broadcast_to(start, end.shape)
        cells, position = traverse(start, end)

        inside = np.all((cells >= 0) & (cells < self.dims), axis=1)
        keys = (cells[:, 0] * self.dims + cells[:, 1]) * self.dims + cells[:, 2]
        hits = np.unique(keys[inside & (position == 1)])
        misses = np.unique(keys[inside & (position == 0)])
        misses = misses[~np.isin(misses, hits, assume_unique=True)]

        self.apply(hits, LOG_ODDS_HIT)
        self.apply(misses, LOG_ODDS_MISS)
        return UpdateSummary(int(hits.shape[0]), int(misses.shape[0]))

    def apply(self, keys, increment):
        """Add increment to the cells behind linear keys, clamped to the log-odds bounds"""
        i, remainder = np.divmod(keys, self.dims * self.dims)
        j, k = np.divmod(remainder, self.dims)
        cells = self.cells
        for key in zip(i.tolist(), j.tolist(), k.tolist()):
            value = cells.get(key, 0.0) + increment
            cells[key] = min(LOG_ODDS_MAX, max(LOG_ODDS_MIN, value))


def traverse(start, end):
    """Integer 3D line traversal between cell pairs (n, 3).
    Return the concatenated cells of all lines and a position code per cell:
    -1 first cell, 1 last cell, 0 in between. A single-cell line is coded 1."""
    start = np.asarray(start, dtype=np.int64).reshape(-1, 3)
    end = np.asarray(end, dtype=np.int64).reshape(-1, 3)
    delta = end - start
    steps = np.abs(delta).max(axis=1)
    lengths = steps + 1

    line = np.repeat(np.arange(start.shape[0]), lengths)
    offsets = np.cumsum(lengths) - lengths
    s = np.arange(line.shape[0]) - np.repeat(offsets, lengths)

    # round(delta * s / steps) with halves rounded up, in exact integer arithmetic
    denominator = np.maximum(steps, 1)[line][:, None]
    cells = start[line] + (2 * delta[line] * s[:, None] + denominator) // (2 * denominator)

    position = np.zeros(line.shape[0], dtype=np.int8)
    position[offsets] = -1
    position[offsets + lengths - 1] = 1
    return cells, position


def new_grid(origin, extent, cell_size):
    """Empty grid over the cube [origin, origin + extent)"""
    return OccupancyGrid(origin, extent, cell_size)


def serialize(grid):
    """OGM1 bytes: header then (i, j, k, log-odds) records in lexicographic cell order"""
    keys = sorted(grid.cells)
    records = np.zeros(len(keys), dtype=RECORD)
    if keys:
        indices = np.array(keys, dtype=np.int64)
        records['i'] = indices[:, 0]
        records['j'] = indices[:, 1]
        records['k'] = indices[:, 2]
        records['log_odds'] = [grid.cells[key] for key in keys]
    header = HEADER.pack(MAGIC, *grid.origin.tolist(), grid.extent, grid.cell_size, len(keys))
    return header + records.tobytes()


def deserialize(data):
    """Inverse of serialize"""
    if len(data) < HEADER.size:
        raise FormatError('OGM stream shorter than its header')
    magic, ox, oy, oz, extent, cell_size, count = HEADER.unpack(data[:HEADER.size])
    if magic != MAGIC:
        if magic[:3] == MAGIC[:3]:
            raise FormatError('OGM version mismatch: ' + repr(magic))
        raise FormatError('not an OGM stream: ' + repr(magic))

    expected = HEADER.size + count * RECORD.itemsize
    if len(data) != expected:
        raise FormatError('OGM stream has ' + str(len(data)) + ' bytes, expected ' + str(expected))

    try:
        grid = OccupancyGrid((ox, oy, oz), extent, cell_size)
    except ConfigError as exception_error:
        raise FormatError('OGM header: ' + exception_error.__str__()) from None

    records = np.frombuffer(data[HEADER.size:], dtype=RECORD, count=count)
    for i, j, k, value in zip(records['i'].tolist(), records['j'].tolist(),
                              records['k'].tolist(), records['log_odds'].tolist()):
        grid.cells[(i, j, k)] = value
    return grid
