"""
Triangle meshes: ASCII OBJ/PLY loading, load-time normalization and a
median-split bounding volume hierarchy for ray casting.

This software may be modified and distributed under the terms of the
MIT license. See the LICENSE file for details.
"""

import logging
import os

# pylint: disable=E0401
import numpy as np

# pylint: disable=E0402
from .exceptions import MeshError

LOGGER = logging.getLogger(__name__)

# ×1.0 objects fit a cube of this edge length (meters)
REFERENCE_EXTENT = 0.25
LEAF_SIZE = 8
DEGENERATE_AREA = 1e-14
NO_HIT = np.inf


class BVH():
    """Flattened bounding volume hierarchy over mesh triangles.
    Node i covers triangles order[start[i]:start[i] + count[i]] when it is a leaf
    (left[i] == -1), otherwise its children are left[i] and right[i]."""
    def __init__(self, vertices, triangles, leaf_size=LEAF_SIZE):
        corners = vertices[triangles]
        centroids = corners.mean(axis=1)
        tri_min = corners.min(axis=1)
        tri_max = corners.max(axis=1)

        self.order = np.arange(triangles.shape[0])
        node_min, node_max, left, right, start, count = [], [], [], [], [], []

        def new_node(lower, upper):
            node_min.append(tri_min[self.order[lower:upper]].min(axis=0))
            node_max.append(tri_max[self.order[lower:upper]].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(lower)
            count.append(upper - lower)
            return len(left) - 1

        stack = [(new_node(0, triangles.shape[0]), 0, triangles.shape[0])]
        while stack:
            node, lower, upper = stack.pop()
            if upper - lower <= leaf_size:
                continue

            # median split along the widest centroid axis
            members = self.order[lower:upper]
            spread = centroids[members].max(axis=0) - centroids[members].min(axis=0)
            axis = int(np.argmax(spread))
            if spread[axis] <= 0.0:
                continue
            ranked = members[np.argsort(centroids[members, axis], kind='stable')]
            self.order[lower:upper] = ranked
            middle = lower + (upper - lower) // 2

            left[node] = new_node(lower, middle)
            right[node] = new_node(middle, upper)
            count[node] = 0
            stack.append((left[node], lower, middle))
            stack.append((right[node], middle, upper))

        self.node_min = np.array(node_min)
        self.node_max = np.array(node_max)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.start = np.array(start, dtype=np.int64)
        self.count = np.array(count, dtype=np.int64)

    @property
    def node_count(self):
        """Number of nodes in the hierarchy"""
        return self.left.shape[0]


class TriangleMesh():
    """Indexed triangle mesh (meters) with its acceleration structure"""
    def __init__(self, vertices, triangles, name='mesh'):
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)

        if triangles.shape[0] == 0 or vertices.shape[0] == 0:
            raise MeshError('mesh has no triangles', path=name)
        if triangles.min() < 0 or triangles.max() >= vertices.shape[0]:
            raise MeshError('triangle index out of range', path=name)
        if not np.all(np.isfinite(vertices)):
            raise MeshError('mesh has non-finite vertices', path=name)

        # drop zero-area triangles
        areas = triangle_areas(vertices, triangles)
        keep = areas > DEGENERATE_AREA
        if not np.any(keep):
            raise MeshError('mesh has only degenerate triangles', path=name)
        if not np.all(keep):
            LOGGER.debug('%s: dropped %d degenerate triangles', name, int((~keep).sum()))

        self.name = name
        self.vertices = vertices
        self.triangles = triangles[keep]
        self.vertices.flags.writeable = False
        self.triangles.flags.writeable = False
        self.bvh = BVH(self.vertices, self.triangles)

    def bounds(self):
        """Return the axis-aligned bounding box (min corner, max corner)"""
        used = self.vertices[np.unique(self.triangles)]
        return used.min(axis=0), used.max(axis=0)

    def center(self):
        """Center of the bounding box"""
        lower, upper = self.bounds()
        return 0.5 * (lower + upper)

    def bounding_radius(self):
        """Half the bounding box diagonal"""
        lower, upper = self.bounds()
        return 0.5 * float(np.linalg.norm(upper - lower))

    def areas(self):
        """Per-triangle areas (m²)"""
        return triangle_areas(self.vertices, self.triangles)

    def corners(self):
        """Triangle corner coordinates, shape (m, 3, 3)"""
        return self.vertices[self.triangles]

    def scaled(self, factor, about=None):
        """Return a copy scaled uniformly about a point (bounding box center by default)"""
        about = self.center() if about is None else np.asarray(about, dtype=np.float64)
        return TriangleMesh(about + (self.vertices - about) * factor, self.triangles, name=self.name)

    def intersect(self, origins, directions, max_range=np.inf):
        """Cast rays against the mesh. Return the hit distance per ray
        (NO_HIT when nothing lies within max_range). Directions must be unit length."""
        origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
        closest = np.full(origins.shape[0], NO_HIT)
        if origins.shape[0] == 0:
            return closest

        with np.errstate(divide='ignore', invalid='ignore'):
            inverse = 1.0 / directions
        corners = self.corners()
        bvh = self.bvh

        # packet traversal: every stack entry carries the rays still alive in that node
        stack = [(0, np.arange(origins.shape[0]))]
        while stack:
            node, rays = stack.pop()
            entry, leave = slab_test(origins[rays], inverse[rays],
                                     bvh.node_min[node], bvh.node_max[node])
            alive = (entry <= leave) & (leave >= 0.0) & (entry <= np.minimum(closest[rays], max_range))
            rays = rays[alive]
            if rays.shape[0] == 0:
                continue

            if bvh.left[node] >= 0:
                stack.append((bvh.right[node], rays))
                stack.append((bvh.left[node], rays))
                continue

            members = bvh.order[bvh.start[node]:bvh.start[node] + bvh.count[node]]
            hits = intersect_triangles(origins[rays], directions[rays], corners[members])
            nearest = hits.min(axis=1)
            closest[rays] = np.minimum(closest[rays], nearest)

        closest[closest > max_range] = NO_HIT
        return closest


def triangle_areas(vertices, triangles):
    """Area of each triangle"""
    corners = vertices[triangles]
    return 0.5 * np.linalg.norm(np.cross(corners[:, 1] - corners[:, 0],
                                         corners[:, 2] - corners[:, 0]), axis=1)


def slab_test(origins, inverse, box_min, box_max):
    """Ray/AABB slab test; return entry and exit distances per ray"""
    with np.errstate(invalid='ignore'):
        near = (box_min - origins) * inverse
        far = (box_max - origins) * inverse
    # 0 * inf gives nan for rays lying in a slab plane; treat as unbounded
    near = np.where(np.isnan(near), -np.inf, near)
    far = np.where(np.isnan(far), np.inf, far)
    entry = np.minimum(near, far).max(axis=1)
    leave = np.maximum(near, far).min(axis=1)
    return entry, leave


def intersect_triangles(origins, directions, corners, epsilon=1e-12):
    """Möller-Trumbore for every (ray, triangle) pair.
    origins/directions: (r, 3); corners: (m, 3, 3). Return (r, m) distances, inf on miss.
    Written component-wise so any subset of rays reproduces the same floats."""
    ox, oy, oz = (origins[:, i][:, None] for i in range(3))
    dx, dy, dz = (directions[:, i][:, None] for i in range(3))
    ax, ay, az = (corners[:, 0, i][None, :] for i in range(3))
    e1x, e1y, e1z = (corners[:, 1, i][None, :] - corners[:, 0, i][None, :] for i in range(3))
    e2x, e2y, e2z = (corners[:, 2, i][None, :] - corners[:, 0, i][None, :] for i in range(3))

    # p = d x e2
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz

    with np.errstate(divide='ignore', invalid='ignore'):
        inv_det = 1.0 / det
        tx, ty, tz = ox - ax, oy - ay, oz - az
        u = (tx * px + ty * py + tz * pz) * inv_det
        # q = t x e1
        qx = ty * e1z - tz * e1y
        qy = tz * e1x - tx * e1z
        qz = tx * e1y - ty * e1x
        v = (dx * qx + dy * qy + dz * qz) * inv_det
        distance = (e2x * qx + e2y * qy + e2z * qz) * inv_det

    valid = (np.abs(det) > epsilon) & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (distance > epsilon)
    return np.where(valid, distance, NO_HIT)


def parse_obj(path):
    """Parse an ASCII Wavefront OBJ file into (vertices, triangles).
    Polygons are fan-triangulated; negative indices are relative."""
    vertices = []
    triangles = []
    with open(path, 'r') as infile:
        for line_number, line in enumerate(infile, start=1):
            fields = line.split('#', 1)[0].split()
            if not fields:
                continue
            if fields[0] == 'v':
                try:
                    vertices.append([float(value) for value in fields[1:4]])
                except ValueError:
                    raise MeshError('invalid vertex coordinates', path, line_number) from None
                if len(vertices[-1]) != 3:
                    raise MeshError('vertex needs 3 coordinates', path, line_number)
            elif fields[0] == 'f':
                if len(fields) < 4:
                    raise MeshError('face needs at least 3 vertices', path, line_number)
                corners = []
                for field in fields[1:]:
                    try:
                        index = int(field.split('/')[0])
                    except ValueError:
                        raise MeshError('invalid face index ' + repr(field), path, line_number) \
                            from None
                    if index == 0:
                        raise MeshError('face index 0 is not valid in OBJ', path, line_number)
                    index = index - 1 if index > 0 else len(vertices) + index
                    if not 0 <= index < len(vertices):
                        raise MeshError('face index out of range', path, line_number)
                    corners.append(index)
                for i in range(1, len(corners) - 1):
                    triangles.append([corners[0], corners[i], corners[i + 1]])
            else:
                # vn, vt, o, g, s, usemtl, mtllib: not needed for depth
                pass
    return vertices, triangles


def parse_ply(path):
    """Parse an ASCII PLY file into (vertices, triangles)"""
    with open(path, 'r') as infile:
        lines = infile.read().split('\n')

    if not lines or lines[0].strip() != 'ply':
        raise MeshError('missing "ply" magic', path, 1)

    elements = []
    line_number = 1
    header_done = False
    while line_number < len(lines):
        fields = lines[line_number].split()
        line_number += 1
        if not fields or fields[0] in ('comment', 'obj_info'):
            continue
        if fields[0] == 'format':
            if len(fields) < 2 or fields[1] != 'ascii':
                raise MeshError('only ASCII PLY is supported', path, line_number)
        elif fields[0] == 'element':
            try:
                elements.append({'name': fields[1], 'count': int(fields[2]), 'properties': []})
            except (IndexError, ValueError):
                raise MeshError('malformed element line', path, line_number) from None
        elif fields[0] == 'property':
            if not elements:
                raise MeshError('property before any element', path, line_number)
            elements[-1]['properties'].append(fields[-1])
        elif fields[0] == 'end_header':
            header_done = True
            break
        else:
            raise MeshError('unknown header keyword ' + repr(fields[0]), path, line_number)
    if not header_done:
        raise MeshError('missing end_header', path, line_number)

    vertices = []
    triangles = []
    for element in elements:
        for _ in range(element['count']):
            while line_number < len(lines) and not lines[line_number].strip():
                line_number += 1
            if line_number >= len(lines):
                raise MeshError('unexpected end of file in ' + element['name'], path, line_number)
            fields = lines[line_number].split()
            line_number += 1
            try:
                if element['name'] == 'vertex':
                    values = dict(zip(element['properties'], fields))
                    vertices.append([float(values['x']), float(values['y']), float(values['z'])])
                elif element['name'] == 'face':
                    count = int(fields[0])
                    corners = [int(value) for value in fields[1:1 + count]]
                    if count < 3 or len(corners) != count:
                        raise ValueError('short face')
                    for i in range(1, count - 1):
                        triangles.append([corners[0], corners[i], corners[i + 1]])
            except (KeyError, ValueError):
                raise MeshError('malformed ' + element['name'] + ' record', path, line_number) \
                    from None
    return vertices, triangles


def load_mesh(path, scale=1.0):
    """Load an ASCII OBJ or PLY mesh. The mesh is rescaled about its
    bounding-box center so that scale 1.0 fits the reference cube."""
    if not scale > 0:
        raise MeshError('scale should be > 0, got ' + str(scale), path=path)
    if not os.path.isfile(path):
        raise MeshError('file not found', path=path)

    extension = os.path.splitext(path)[1].lower()
    if extension == '.obj':
        vertices, triangles = parse_obj(path)
    elif extension == '.ply':
        vertices, triangles = parse_ply(path)
    else:
        raise MeshError('unsupported mesh format ' + repr(extension), path=path)

    if not vertices or not triangles:
        raise MeshError('mesh is empty', path=path)

    vertices = np.array(vertices, dtype=np.float64)
    triangles = np.array(triangles, dtype=np.int64)
    if triangles.min() < 0 or triangles.max() >= vertices.shape[0]:
        raise MeshError('triangle index out of range', path=path)

    used = vertices[np.unique(triangles)]
    lower, upper = used.min(axis=0), used.max(axis=0)
    largest = float((upper - lower).max())
    if largest <= 0.0:
        raise MeshError('mesh has zero extent', path=path)

    center = 0.5 * (lower + upper)
    factor = (REFERENCE_EXTENT / largest) * scale
    name = os.path.splitext(os.path.basename(path))[0]
    mesh = TriangleMesh(center + (vertices - center) * factor, triangles, name=name)
    LOGGER.debug('loaded %s: %d vertices, %d triangles, scale %.3f',
                 name, mesh.vertices.shape[0], mesh.triangles.shape[0], scale)
    return mesh
