"""Rigid-body geometry: unit quaternions, rotation vectors, poses.

Quaternions are stored as numpy arrays ``[w, x, y, z]`` and kept unit-norm;
rotation vectors are axis * angle (radians).  All functions are pure and
operate on plain float64 arrays so they stay deterministic across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])

# Below this angle the sin(x)/x style terms switch to their series expansions.
_SMALL_ANGLE = 1e-8


def normalize_quat(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise ValueError("zero quaternion cannot be normalized")
    out = q / n
    # Canonical sign (w >= 0) so equal rotations compare equal.
    if out[0] < 0.0:
        out = -out
    return out


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b (apply b first, then a)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_rotvec(rv: np.ndarray) -> np.ndarray:
    rv = np.asarray(rv, dtype=float)
    angle = float(np.linalg.norm(rv))
    if angle < _SMALL_ANGLE:
        # sin(a/2)/a ~ 1/2 - a^2/48
        scale = 0.5 - angle * angle / 48.0
        return normalize_quat(np.array([1.0, *(rv * scale)]))
    axis = rv / angle
    half = 0.5 * angle
    return normalize_quat(np.array([np.cos(half), *(axis * np.sin(half))]))


def rotvec_from_quat(q: np.ndarray) -> np.ndarray:
    q = normalize_quat(q)
    w = min(1.0, max(-1.0, float(q[0])))
    vec = q[1:]
    s = float(np.linalg.norm(vec))
    if s < _SMALL_ANGLE:
        # angle ~ 2*s/w for tiny rotations
        return vec * (2.0 / w if w != 0.0 else 2.0)
    angle = 2.0 * np.arctan2(s, w)
    return vec * (angle / s)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = normalize_quat(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate a 3-vector by a unit quaternion."""
    w = q[0]
    u = q[1:]
    v = np.asarray(v, dtype=float)
    # v' = v + 2*u x (u x v + w*v), standard expansion of q v q*
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def rotation_distance(qa: np.ndarray, qb: np.ndarray) -> float:
    """Angle of the relative rotation between two orientations (radians)."""
    return float(np.linalg.norm(rotvec_from_quat(quat_multiply(quat_conjugate(qa), qb))))


@dataclass(frozen=True)
class Pose:
    """Position plus unit-quaternion orientation of a rigid frame."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "orientation", normalize_quat(self.orientation))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), IDENTITY_QUAT)

    @staticmethod
    def from_rotvec(position, rotvec) -> "Pose":
        return Pose(np.asarray(position, dtype=float), quat_from_rotvec(np.asarray(rotvec, dtype=float)))

    def rotvec(self) -> np.ndarray:
        return rotvec_from_quat(self.orientation)

    def compose(self, other: "Pose") -> "Pose":
        """This pose followed by ``other`` in this pose's local frame."""
        return Pose(
            self.position + quat_rotate(self.orientation, other.position),
            quat_multiply(self.orientation, other.orientation),
        )

    def relative_to(self, other: "Pose") -> "Pose":
        """The transform t such that ``other.compose(t) == self``."""
        inv = quat_conjugate(other.orientation)
        return Pose(
            quat_rotate(inv, self.position - other.position),
            quat_multiply(inv, self.orientation),
        )

    def almost_equal(self, other: "Pose", pos_tol: float = 1e-9, rot_tol: float = 1e-9) -> bool:
        return (
            float(np.linalg.norm(self.position - other.position)) <= pos_tol
            and rotation_distance(self.orientation, other.orientation) <= rot_tol
        )
