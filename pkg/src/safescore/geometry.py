"""Quaternion and box helpers.

Quaternions are ``(w, x, y, z)`` tuples mapping an object's local frame into
the world frame.  Boxes are centred on the object position with half-extents
along the local axes.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]

IDENTITY: Quat = (1.0, 0.0, 0.0, 0.0)


def quat_norm(q: Sequence[float]) -> float:
    return math.sqrt(sum(c * c for c in q))


def quat_multiply(a: Sequence[float], b: Sequence[float]) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_from_axis_angle(axis: Sequence[float], angle_rad: float) -> Quat:
    n = math.sqrt(sum(c * c for c in axis))
    if n == 0:
        raise ValueError("rotation axis must be non-zero")
    s = math.sin(angle_rad / 2) / n
    return (math.cos(angle_rad / 2), axis[0] * s, axis[1] * s, axis[2] * s)


def rotation_matrix(q: Sequence[float]) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def up_axis(q: Sequence[float]) -> Vec3:
    """World direction of the local +z axis."""
    w, x, y, z = q
    return (2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y))


def angle_between_deg(u: Sequence[float], v: Sequence[float]) -> float:
    # atan2 form stays accurate near 0 and 180 degrees, unlike acos(dot).
    cx = u[1] * v[2] - u[2] * v[1]
    cy = u[2] * v[0] - u[0] * v[2]
    cz = u[0] * v[1] - u[1] * v[0]
    dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
    return math.degrees(math.atan2(math.sqrt(cx * cx + cy * cy + cz * cz), dot))


def tilt_deg(q_ref: Sequence[float], q: Sequence[float]) -> float:
    """Angle between the up axes of two orientations, in degrees."""
    return angle_between_deg(up_axis(q_ref), up_axis(q))


def world_half_extents(q: Sequence[float], extents: Sequence[float]) -> np.ndarray:
    """Half-extents of the world axis-aligned box enclosing an oriented box."""
    return np.abs(rotation_matrix(q)) @ np.asarray(extents, dtype=float)


def world_aabb(position: Sequence[float], q: Sequence[float], extents: Sequence[float]):
    c = np.asarray(position, dtype=float)
    h = world_half_extents(q, extents)
    return c - h, c + h


def box_corners(position: Sequence[float], q: Sequence[float], extents: Sequence[float]) -> np.ndarray:
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    local = signs * np.asarray(extents, dtype=float)
    return local @ rotation_matrix(q).T + np.asarray(position, dtype=float)


def to_local(point: Sequence[float], position: Sequence[float], q: Sequence[float]) -> np.ndarray:
    """Express world points (shape ``(3,)`` or ``(n, 3)``) in a box's local frame."""
    d = np.asarray(point, dtype=float) - np.asarray(position, dtype=float)
    return d @ rotation_matrix(q)


def interval_overlap(lo_a: np.ndarray, hi_a: np.ndarray, lo_b: np.ndarray, hi_b: np.ndarray) -> np.ndarray:
    return np.clip(np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b), 0.0, None)


def horizontal_distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.dist(a, b)
