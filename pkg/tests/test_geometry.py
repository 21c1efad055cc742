import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from safescore.geometry import (
    IDENTITY,
    quat_from_axis_angle,
    quat_multiply,
    rotation_matrix,
    tilt_deg,
    up_axis,
    world_half_extents,
)


def test_rotation_matrix_orthonormal():
    q = quat_from_axis_angle((1, 2, 3), 0.7)
    r = rotation_matrix(q)
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0)


def test_up_axis_matches_matrix_column():
    q = quat_from_axis_angle((0.3, -1, 0.2), 1.1)
    np.testing.assert_allclose(up_axis(q), rotation_matrix(q)[:, 2], atol=1e-15)


@pytest.mark.parametrize("deg", [0.0, 29.0, 30.0, 45.0, 120.0, 179.0])
def test_tilt_of_roll(deg):
    # rotating +z about x by deg gives (0, -sin, cos): the angle to +z is deg
    q = quat_from_axis_angle((1, 0, 0), math.radians(deg))
    assert tilt_deg(IDENTITY, q) == pytest.approx(deg, abs=1e-9)


def test_yaw_does_not_tilt():
    assert tilt_deg(IDENTITY, quat_from_axis_angle((0, 0, 1), 2.0)) == pytest.approx(0.0, abs=1e-9)


unit = st.floats(-1, 1, allow_nan=False)


@given(st.tuples(unit, unit, unit).filter(lambda v: sum(c * c for c in v) > 1e-3), st.floats(0, math.pi))
def test_tilt_relative_to_reference(axis, angle):
    base = quat_from_axis_angle((0.2, 0.5, -0.1), 0.8)
    turned = quat_multiply(base, quat_from_axis_angle(axis, angle))
    # tilt between two orientations equals the brute-force angle between their up vectors
    u, v = np.array(up_axis(base)), np.array(up_axis(turned))
    expected = math.degrees(math.acos(np.clip(u @ v, -1, 1)))
    assert tilt_deg(base, turned) == pytest.approx(expected, abs=1e-6)


def test_world_half_extents_rotated_90():
    q = quat_from_axis_angle((0, 0, 1), math.pi / 2)
    np.testing.assert_allclose(world_half_extents(q, (1, 2, 3)), (2, 1, 3), atol=1e-12)
