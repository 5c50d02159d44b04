"""Interpolation mapping from human fingertip motion to robot hand joints.

Each human finger's tip is projected onto the segment between its
calibrated stretch and contract positions, giving a ratio in [0, 1]; that
ratio linearly interpolates the active manipulation type's stretch and
contract joint angles for the robot finger group the human finger drives.
Functions here run inside the control loop, so they stay allocation-light
and vectorized over the hand's joints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import CalibrationError, LibraryFormatError
from .geometry import Pose
from .hand import HandKinematicModel
from .library import Library, ManipulationType

HUMAN_FINGERS = ("thumb", "index", "middle", "ring", "pinky")

# Human pinky is unused on the 4-finger reference hand.
DEFAULT_LINKAGE = {"thumb": "thumb", "index": "index", "middle": "middle", "ring": "ring"}

EPS_CAL = 1e-3  # below glove noise floor; keeps the ratio denominator sane


@dataclass(frozen=True)
class CalibrationPair:
    """Per-finger stretch and contract fingertip positions (meters)."""

    p_stretch: np.ndarray  # (n_fingers, 3)
    p_contract: np.ndarray  # (n_fingers, 3)
    fingers: tuple[str, ...] = HUMAN_FINGERS

    def __post_init__(self):
        stretch = np.asarray(self.p_stretch, dtype=float).reshape(len(self.fingers), 3)
        contract = np.asarray(self.p_contract, dtype=float).reshape(len(self.fingers), 3)
        object.__setattr__(self, "p_stretch", stretch)
        object.__setattr__(self, "p_contract", contract)
        gaps = np.linalg.norm(contract - stretch, axis=1)
        if np.any(gaps <= EPS_CAL):
            bad = self.fingers[int(np.argmin(gaps))]
            raise CalibrationError(
                f"calibration segment for finger {bad!r} is degenerate "
                f"(|contract - stretch| <= {EPS_CAL} m)"
            )

    def finger_index(self, finger: str) -> int:
        try:
            return self.fingers.index(finger)
        except ValueError:
            raise CalibrationError(f"no calibration for finger {finger!r}") from None

    def segment(self, finger: str) -> tuple[np.ndarray, np.ndarray]:
        i = self.finger_index(finger)
        return self.p_stretch[i], self.p_contract[i]


def default_calibration() -> CalibrationPair:
    """Canonical virtual-glove calibration: 5 cm curl segments, fingers spread."""
    stretch = np.array(
        [
            [0.02, 0.06, 0.0],
            [0.09, 0.03, 0.0],
            [0.10, 0.00, 0.0],
            [0.09, -0.03, 0.0],
            [0.07, -0.06, 0.0],
        ]
    )
    contract = stretch + np.array([-0.02, 0.0, -0.046])
    return CalibrationPair(p_stretch=stretch, p_contract=contract)


@dataclass(frozen=True)
class HumanHandFrame:
    """One captured glove tick: fingertip positions plus 6-DOF wrist pose."""

    fingertips: np.ndarray  # (n_fingers, 3) in HUMAN_FINGERS order
    wrist: Pose
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "fingertips", np.asarray(self.fingertips, dtype=float).reshape(-1, 3))


@dataclass(frozen=True)
class MappingAssignment:
    """Which type is active and which human finger drives which robot finger."""

    type_id: str
    linkage: dict = field(default_factory=lambda: dict(DEFAULT_LINKAGE))


def compute_ratio(p_current: np.ndarray, p_stretch: np.ndarray, p_contract: np.ndarray) -> float:
    """Normalized projection of the fingertip onto its calibration segment."""
    p_current = np.asarray(p_current, dtype=float)
    segment = np.asarray(p_contract, dtype=float) - np.asarray(p_stretch, dtype=float)
    denom = float(segment @ segment)
    if denom <= EPS_CAL * EPS_CAL:
        raise CalibrationError("degenerate stretch/contract pair")
    ratio = float((p_current - p_stretch) @ segment) / denom
    return min(1.0, max(0.0, ratio))


def interpolate_joints(ratio: float, stretch: np.ndarray, contract: np.ndarray) -> np.ndarray:
    """Linear blend between stretch and contract joint angles."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must be in [0, 1], got {ratio}")
    stretch = np.asarray(stretch, dtype=float)
    contract = np.asarray(contract, dtype=float)
    return ratio * (contract - stretch) + stretch


@dataclass(frozen=True)
class CompiledMapping:
    """Assignment resolved against a type and hand model for loop use.

    Precomputes posture arrays and per-link joint index slices so map_frame
    does no lookups or validation per tick.
    """

    type_id: str
    stretch: np.ndarray  # (dof,)
    contract: np.ndarray  # (dof,)
    links: tuple[tuple[int, slice], ...]  # (human finger index, robot joint slice)
    lower: np.ndarray
    upper: np.ndarray

    @staticmethod
    def build(
        assignment: MappingAssignment,
        calibration: CalibrationPair,
        library: Library,
        hand_model: HandKinematicModel,
    ) -> "CompiledMapping":
        mtype = library.get_type(assignment.type_id)
        stretch = np.asarray(mtype.stretch_posture, dtype=float)
        contract = np.asarray(mtype.contract_posture, dtype=float)
        if stretch.shape[0] != hand_model.dof:
            raise LibraryFormatError(
                f"type {mtype.id!r} postures do not match hand model {hand_model.id!r}"
            )
        links = []
        for human, robot in assignment.linkage.items():
            human_idx = calibration.finger_index(human)
            robot_idx = hand_model.finger_index(robot)
            links.append((human_idx, hand_model.finger_slices[robot_idx]))
        return CompiledMapping(
            type_id=mtype.id,
            stretch=stretch,
            contract=contract,
            links=tuple(links),
            lower=hand_model.lower,
            upper=hand_model.upper,
        )


def map_ratios(frame: HumanHandFrame, calibration: CalibrationPair) -> np.ndarray:
    """Ratio per human finger for the given frame."""
    if frame.fingertips.shape[0] != calibration.p_stretch.shape[0]:
        raise CalibrationError(
            f"frame has {frame.fingertips.shape[0]} fingertips, "
            f"calibration has {calibration.p_stretch.shape[0]}"
        )
    return np.array(
        [
            compute_ratio(frame.fingertips[i], calibration.p_stretch[i], calibration.p_contract[i])
            for i in range(calibration.p_stretch.shape[0])
        ]
    )


def map_frame_compiled(
    frame: HumanHandFrame, compiled: CompiledMapping, calibration: CalibrationPair
) -> tuple[np.ndarray, np.ndarray]:
    """Joint targets plus per-human-finger ratios for one glove frame.

    Unlinked joints take the type's stretch value; the result is clamped to
    joint limits (a no-op for valid postures, kept as a hard guarantee).
    """
    ratios = map_ratios(frame, calibration)
    q = compiled.stretch.copy()
    for human_idx, robot_slice in compiled.links:
        r = ratios[human_idx]
        q[robot_slice] = r * (compiled.contract[robot_slice] - compiled.stretch[robot_slice]) + compiled.stretch[
            robot_slice
        ]
    np.clip(q, compiled.lower, compiled.upper, out=q)
    return q, ratios


def map_frame(
    frame: HumanHandFrame,
    assignment: MappingAssignment,
    calibration: CalibrationPair,
    library: Library,
    hand_model: HandKinematicModel,
) -> np.ndarray:
    """One-shot mapping; loop code should compile the assignment once instead."""
    compiled = CompiledMapping.build(assignment, calibration, library, hand_model)
    q, _ = map_frame_compiled(frame, compiled, calibration)
    return q


def posture_frame(
    ratio_per_finger, calibration: CalibrationPair, wrist: Pose | None = None, timestamp: float = 0.0
) -> HumanHandFrame:
    """Synthesize a glove frame with fingertips at given ratios along the segments."""
    ratios = np.asarray(ratio_per_finger, dtype=float).reshape(-1)
    tips = calibration.p_stretch + ratios[:, None] * (calibration.p_contract - calibration.p_stretch)
    return HumanHandFrame(fingertips=tips, wrist=wrist or Pose.identity(), timestamp=timestamp)


# ---------------------------------------------------------------------------
# Session profile persistence (per operator, per hand)
# ---------------------------------------------------------------------------


def save_profile(path: str | Path, calibrations: dict[str, dict[str, CalibrationPair]]) -> None:
    doc = {"schema_version": "1", "operators": {}}
    for operator, hands in calibrations.items():
        doc["operators"][operator] = {
            hand: {
                "fingers": list(cal.fingers),
                "p_stretch": [[float(v) for v in row] for row in cal.p_stretch],
                "p_contract": [[float(v) for v in row] for row in cal.p_contract],
            }
            for hand, cal in hands.items()
        }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def load_profile(path: str | Path) -> dict[str, dict[str, CalibrationPair]]:
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict) or "operators" not in doc:
        raise LibraryFormatError(f"profile file {path} must define 'operators'")
    out: dict[str, dict[str, CalibrationPair]] = {}
    for operator, hands in doc["operators"].items():
        out[operator] = {
            hand: CalibrationPair(
                p_stretch=np.asarray(entry["p_stretch"], dtype=float),
                p_contract=np.asarray(entry["p_contract"], dtype=float),
                fingers=tuple(entry["fingers"]),
            )
            for hand, entry in hands.items()
        }
    return out
