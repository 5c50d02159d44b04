"""Hand kinematics: chain model, FK, warm-started IK, fingertip adjustment.

The hand is a set of independent open chains (one per finger), each joint
revolute about a fixed local axis.  Because chains share no joints, IK
decouples per finger: solving for one fingertip never moves another
finger's joints, which is what keeps adjusted types close to the original
posture.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .errors import DofMismatchError, IkConvergenceError, LibraryFormatError
from .geometry import (
    Pose,
    quat_from_rotvec,
    quat_multiply,
    quat_conjugate,
    quat_rotate,
    rotvec_from_quat,
)

# Solver defaults; damping keeps steps bounded near singular stretches and
# the per-iteration step cap stops the linearized step from overshooting
# joint limits when the target sits at the workspace boundary.
DEFAULT_POS_TOL = 1e-4
DEFAULT_ROT_TOL = 1e-3
DEFAULT_MAX_ITERS = 200
DEFAULT_DAMPING = 1e-3
DEFAULT_MAX_STEP = 0.3


@dataclass(frozen=True)
class Joint:
    axis: np.ndarray
    origin_offset: np.ndarray
    origin_rotation: np.ndarray  # unit quaternion
    limits: tuple[float, float]

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        n = float(np.linalg.norm(axis))
        if n == 0.0:
            raise LibraryFormatError("joint axis must be a nonzero vector")
        object.__setattr__(self, "axis", axis / n)
        object.__setattr__(self, "origin_offset", np.asarray(self.origin_offset, dtype=float).reshape(3))
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if not lo < hi:
            raise LibraryFormatError(f"joint limits must satisfy min < max, got [{lo}, {hi}]")
        object.__setattr__(self, "limits", (lo, hi))


@dataclass(frozen=True)
class FingerChain:
    name: str
    joints: tuple[Joint, ...]
    fingertip_offset: np.ndarray

    def __post_init__(self):
        if not self.joints:
            raise LibraryFormatError(f"finger {self.name!r} has no joints")
        object.__setattr__(self, "fingertip_offset", np.asarray(self.fingertip_offset, dtype=float).reshape(3))


class HandKinematicModel:
    """Immutable joint-chain description of a multi-fingered hand."""

    def __init__(self, model_id: str, fingers: Sequence[FingerChain]):
        if not fingers:
            raise LibraryFormatError("hand model needs at least one finger chain")
        self.id = model_id
        self.fingers: tuple[FingerChain, ...] = tuple(fingers)
        self.finger_names: tuple[str, ...] = tuple(f.name for f in self.fingers)
        slices = []
        start = 0
        for f in self.fingers:
            slices.append(slice(start, start + len(f.joints)))
            start += len(f.joints)
        self.finger_slices: tuple[slice, ...] = tuple(slices)
        self.dof = start
        self.lower = np.array([j.limits[0] for f in self.fingers for j in f.joints])
        self.upper = np.array([j.limits[1] for f in self.fingers for j in f.joints])

    def finger_index(self, finger: int | str) -> int:
        if isinstance(finger, str):
            try:
                return self.finger_names.index(finger)
            except ValueError:
                raise KeyError(f"no finger named {finger!r} in hand model {self.id!r}") from None
        if not 0 <= finger < len(self.fingers):
            raise KeyError(f"finger index {finger} out of range for hand model {self.id!r}")
        return finger

    def check_dof(self, q: np.ndarray, what: str = "joint vector") -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != self.dof:
            raise DofMismatchError(self.dof, q.shape[0], what)
        return q

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(self.check_dof(q), self.lower, self.upper)

    def within_limits(self, q: np.ndarray, tol: float = 0.0) -> bool:
        q = self.check_dof(q)
        return bool(np.all(q >= self.lower - tol) and np.all(q <= self.upper + tol))


def load_hand_model(path: str | Path) -> HandKinematicModel:
    """Load a hand description file (YAML: id, fingers[].joints[])."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise LibraryFormatError(f"cannot parse hand model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "fingers" not in doc or "id" not in doc:
        raise LibraryFormatError(f"hand model file {path} must define 'id' and 'fingers'")
    fingers = []
    for fdoc in doc["fingers"]:
        try:
            joints = tuple(
                Joint(
                    axis=jdoc["axis"],
                    origin_offset=jdoc["origin_offset"],
                    origin_rotation=quat_from_rotvec(np.asarray(jdoc.get("origin_rotation", (0.0, 0.0, 0.0)), dtype=float)),
                    limits=(jdoc["limits"][0], jdoc["limits"][1]),
                )
                for jdoc in fdoc["joints"]
            )
            fingers.append(FingerChain(name=fdoc["name"], joints=joints, fingertip_offset=fdoc["fingertip_offset"]))
        except (KeyError, TypeError) as exc:
            raise LibraryFormatError(f"hand model file {path}: bad finger entry ({exc})") from exc
    return HandKinematicModel(str(doc["id"]), fingers)


def _chain_frames(chain: FingerChain, q_chain: np.ndarray):
    """World pose after each joint plus per-joint origins and axes.

    Returns (tip_pose, origins (n,3), axes (n,3)) where origins/axes are the
    revolute pivot points and rotation axes in the hand base frame.
    """
    pos = np.zeros(3)
    quat = np.array([1.0, 0.0, 0.0, 0.0])
    origins = np.empty((len(chain.joints), 3))
    axes = np.empty((len(chain.joints), 3))
    for i, joint in enumerate(chain.joints):
        pos = pos + quat_rotate(quat, joint.origin_offset)
        quat = quat_multiply(quat, joint.origin_rotation)
        origins[i] = pos
        axes[i] = quat_rotate(quat, joint.axis)
        quat = quat_multiply(quat, quat_from_rotvec(joint.axis * q_chain[i]))
    tip = Pose(pos + quat_rotate(quat, chain.fingertip_offset), quat)
    return tip, origins, axes


def fingertip_pose(model: HandKinematicModel, q: np.ndarray, finger: int | str) -> Pose:
    q = model.check_dof(q)
    idx = model.finger_index(finger)
    tip, _, _ = _chain_frames(model.fingers[idx], q[model.finger_slices[idx]])
    return tip


def forward_kinematics(model: HandKinematicModel, q: np.ndarray) -> tuple[Pose, ...]:
    """Fingertip pose per chain, composed in the hand base frame."""
    q = model.check_dof(q)
    return tuple(
        _chain_frames(model.fingers[i], q[model.finger_slices[i]])[0] for i in range(len(model.fingers))
    )


def skeleton_points(model: HandKinematicModel, q: np.ndarray) -> dict[str, list[list[float]]]:
    """Per-finger polyline (joint origins plus fingertip) for display."""
    q = model.check_dof(q)
    out: dict[str, list[list[float]]] = {}
    for i, chain in enumerate(model.fingers):
        tip, origins, _ = _chain_frames(chain, q[model.finger_slices[i]])
        pts = [list(map(float, p)) for p in origins]
        pts.append(list(map(float, tip.position)))
        out[chain.name] = pts
    return out


def _pose_residual(target: Pose, current: Pose) -> np.ndarray:
    """6-vector [position error; world-frame rotation-vector error]."""
    rot_err = rotvec_from_quat(quat_multiply(target.orientation, quat_conjugate(current.orientation)))
    return np.concatenate([target.position - current.position, rot_err])


def _normalize_targets(model: HandKinematicModel, targets) -> dict[int, Pose]:
    if isinstance(targets, Mapping):
        return {model.finger_index(k): v for k, v in targets.items()}
    targets = tuple(targets)
    if len(targets) != len(model.fingers):
        raise DofMismatchError(len(model.fingers), len(targets), "fingertip set")
    return dict(enumerate(targets))


def inverse_kinematics(
    model: HandKinematicModel,
    targets,
    warm_start: np.ndarray,
    pos_tol: float = DEFAULT_POS_TOL,
    rot_tol: float = DEFAULT_ROT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    damping: float = DEFAULT_DAMPING,
    max_step: float = DEFAULT_MAX_STEP,
) -> np.ndarray:
    """Damped-least-squares IK over the targeted fingertips.

    ``targets`` is either one Pose per finger or a mapping from finger
    name/index to Pose for a subset.  The solve starts at ``warm_start``
    and only moves joints of targeted fingers; limits are clamped every
    iteration.  Raises IkConvergenceError when any targeted fingertip still
    exceeds tolerance after ``max_iters``.
    """
    q = model.clamp(model.check_dof(warm_start).copy())
    by_finger = _normalize_targets(model, targets)

    for idx, target in by_finger.items():
        chain = model.fingers[idx]
        sl = model.finger_slices[idx]
        lo, hi = model.lower[sl], model.upper[sl]
        q_chain = q[sl].copy()
        lam2 = damping * damping
        for iteration in range(max_iters + 1):
            tip, origins, axes = _chain_frames(chain, q_chain)
            residual = _pose_residual(target, tip)
            pos_err = float(np.linalg.norm(residual[:3]))
            rot_err = float(np.linalg.norm(residual[3:]))
            if pos_err <= pos_tol and rot_err <= rot_tol:
                break
            if iteration == max_iters:
                raise IkConvergenceError(pos_err, rot_err, max_iters)
            jac = np.empty((6, len(chain.joints)))
            jac[:3] = np.cross(axes, tip.position - origins).T
            jac[3:] = axes.T
            jjt = jac @ jac.T + lam2 * np.eye(6)
            dq = jac.T @ np.linalg.solve(jjt, residual)
            biggest = float(np.max(np.abs(dq)))
            if biggest > max_step:
                dq *= max_step / biggest
            q_chain = np.clip(q_chain + dq, lo, hi)
        q[sl] = q_chain
    return q


def adjust_type(
    model: HandKinematicModel,
    q: np.ndarray,
    finger: int | str,
    t_delta: Pose,
    pos_tol: float = DEFAULT_POS_TOL,
    rot_tol: float = DEFAULT_ROT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> np.ndarray:
    """Apply a rigid fingertip offset to a posture.

    The target is the current fingertip pose composed with ``t_delta`` in
    the fingertip's local frame; the IK solve is warm-started at ``q`` so
    the result stays as close as possible to the original posture.
    """
    q = model.check_dof(q)
    idx = model.finger_index(finger)
    target = fingertip_pose(model, q, idx).compose(t_delta)
    return inverse_kinematics(
        model, {idx: target}, warm_start=q, pos_tol=pos_tol, rot_tol=rot_tol, max_iters=max_iters
    )
