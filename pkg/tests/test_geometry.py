import numpy as np
import pytest

from dexteleop.geometry import (
    Pose,
    quat_from_rotvec,
    quat_multiply,
    quat_rotate,
    quat_to_matrix,
    rotation_distance,
    rotvec_from_quat,
)


def test_rotvec_quat_round_trip():
    # Unique representation only inside the pi ball.
    rng = np.random.default_rng(7)
    for _ in range(200):
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        rv = direction * rng.uniform(0, np.pi * 0.999)
        back = rotvec_from_quat(quat_from_rotvec(rv))
        assert np.allclose(back, rv, atol=1e-12)


def test_rotvec_round_trip_tiny_angles():
    for scale in (1e-12, 1e-9, 1e-7):
        rv = np.array([scale, -scale / 2, scale / 3])
        back = rotvec_from_quat(quat_from_rotvec(rv))
        assert np.allclose(back, rv, atol=1e-18 + scale * 1e-9)


def test_quat_rotate_matches_matrix():
    rng = np.random.default_rng(11)
    for _ in range(50):
        q = quat_from_rotvec(rng.normal(size=3))
        v = rng.normal(size=3)
        assert np.allclose(quat_rotate(q, v), quat_to_matrix(q) @ v, atol=1e-12)


def test_quat_multiply_composes_rotations():
    a = quat_from_rotvec([0, 0, np.pi / 2])
    b = quat_from_rotvec([np.pi / 2, 0, 0])
    v = np.array([1.0, 2.0, 3.0])
    assert np.allclose(quat_rotate(quat_multiply(a, b), v), quat_rotate(a, quat_rotate(b, v)))


def test_rotation_distance_is_angle():
    a = quat_from_rotvec([0, 0, 0.3])
    b = quat_from_rotvec([0, 0, -0.2])
    assert rotation_distance(a, b) == pytest.approx(0.5, abs=1e-12)


def test_pose_orientation_normalized():
    p = Pose(np.zeros(3), [2.0, 0.0, 0.0, 0.0])
    assert np.linalg.norm(p.orientation) == pytest.approx(1.0, abs=1e-9)


def test_pose_compose_relative_inverse():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a = Pose(rng.normal(size=3), quat_from_rotvec(rng.normal(size=3)))
        b = Pose(rng.normal(size=3), quat_from_rotvec(rng.normal(size=3)))
        t = b.relative_to(a)
        assert a.compose(t).almost_equal(b, pos_tol=1e-12, rot_tol=1e-12)


def test_pose_identity_compose():
    p = Pose.from_rotvec([0.1, 0.2, 0.3], [0.4, -0.1, 0.2])
    assert p.compose(Pose.identity()).almost_equal(p, pos_tol=1e-15, rot_tol=1e-12)
    assert Pose.identity().compose(p).almost_equal(p, pos_tol=1e-15, rot_tol=1e-12)
