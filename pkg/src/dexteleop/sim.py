"""Simulated device streams, plant, and demonstration recording/replay.

Demonstration files carry a YAML text header (terminated by a `...` line)
followed by length-prefixed binary frames.  Each frame stores a logical
timestamp, a 44-value proprioception vector (two arm poses as position +
rotation vector, then two 16-joint hands), the commanded action in the
same layout, an optional success label, and an observation blob slot that
this simulator leaves empty.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .arm import VelocityCommand
from .errors import DemonstrationFormatError, LibraryFormatError
from .geometry import Pose, quat_from_rotvec, quat_multiply
from .hand import HandKinematicModel
from .library import Library, serialize_library
from .mapping import HUMAN_FINGERS, HumanHandFrame

RECORD_HZ = 15
PROPRIO_DIM = 44
SIDES = ("left", "right")
DEMO_SCHEMA_VERSION = "1"

_HEADER_END = b"\n...\n"
_FRAME_BODY = struct.Struct("<d44d44dBI")  # timestamp, proprio, action, flags, blob length
_LEN_PREFIX = struct.Struct("<I")


def library_hash(library: Library) -> str:
    return hashlib.sha256(serialize_library(library).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Scripted glove tracks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScriptedGloveTrack:
    """Fixed-rate sequence of glove frames standing in for capture hardware."""

    frames: tuple[HumanHandFrame, ...]
    rate_hz: float
    loop: bool = False
    hand: str = "right"
    fingers: tuple[str, ...] = HUMAN_FINGERS

    def __post_init__(self):
        if not self.frames:
            raise LibraryFormatError("glove track has no frames")
        counts = {f.fingertips.shape[0] for f in self.frames}
        if len(counts) != 1:
            raise LibraryFormatError("glove track finger count varies between frames")
        stamps = [f.timestamp for f in self.frames]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise LibraryFormatError("glove track timestamps must strictly increase")

    @property
    def duration(self) -> float:
        return len(self.frames) / self.rate_hz

    def frame_at(self, t: float) -> HumanHandFrame:
        index = int(t * self.rate_hz)
        if self.loop:
            index %= len(self.frames)
        else:
            index = min(index, len(self.frames) - 1)
        return self.frames[index]


def save_track(track: ScriptedGloveTrack, path: str | Path) -> None:
    doc = {
        "schema_version": "1",
        "rate_hz": track.rate_hz,
        "loop": track.loop,
        "hand": track.hand,
        "fingers": list(track.fingers),
        "frames": [
            {
                "t": float(f.timestamp),
                "wrist": {
                    "position": [float(v) for v in f.wrist.position],
                    "rotvec": [float(v) for v in f.wrist.rotvec()],
                },
                "fingertips": [[float(v) for v in tip] for tip in f.fingertips],
            }
            for f in track.frames
        ],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def load_track(path: str | Path) -> ScriptedGloveTrack:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise LibraryFormatError(f"cannot parse track file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "frames" not in doc:
        raise LibraryFormatError(f"track file {path} must define 'frames'")
    frames = tuple(
        HumanHandFrame(
            fingertips=np.asarray(fd["fingertips"], dtype=float),
            wrist=Pose.from_rotvec(fd["wrist"]["position"], fd["wrist"]["rotvec"]),
            timestamp=float(fd["t"]),
        )
        for fd in doc["frames"]
    )
    return ScriptedGloveTrack(
        frames=frames,
        rate_hz=float(doc.get("rate_hz", RECORD_HZ)),
        loop=bool(doc.get("loop", False)),
        hand=str(doc.get("hand", "right")),
        fingers=tuple(doc.get("fingers", HUMAN_FINGERS)),
    )


# ---------------------------------------------------------------------------
# Plant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlantSide:
    arm: Pose
    hand_q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "hand_q", np.asarray(self.hand_q, dtype=float).reshape(-1))


@dataclass(frozen=True)
class PlantState:
    left: PlantSide
    right: PlantSide
    held: tuple[str, ...] = ()  # kinematic attachment flags per side

    @staticmethod
    def initial(model: HandKinematicModel) -> "PlantState":
        rest = model.clamp(np.zeros(model.dof))
        home = {
            "left": Pose(np.array([0.0, 0.3, 0.2]), np.array([1.0, 0.0, 0.0, 0.0])),
            "right": Pose(np.array([0.0, -0.3, 0.2]), np.array([1.0, 0.0, 0.0, 0.0])),
        }
        return PlantState(
            left=PlantSide(arm=home["left"], hand_q=rest.copy()),
            right=PlantSide(arm=home["right"], hand_q=rest.copy()),
        )

    def side(self, name: str) -> PlantSide:
        return getattr(self, name)

    def with_side(self, name: str, side: PlantSide) -> "PlantState":
        return replace(self, **{name: side})


def step_plant(
    side: PlantSide,
    arm_command: VelocityCommand | None,
    hand_target: np.ndarray | None,
    dt: float,
    model: HandKinematicModel,
    hand_rate_limit: float = 2.0,
) -> PlantSide:
    """Integrate one side: exact arm velocity integration, rate-limited hand.

    Joint limits are clamped no matter what the commands ask for.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    arm = side.arm
    if arm_command is not None:
        arm = Pose(
            arm.position + arm_command.linear * dt,
            quat_multiply(quat_from_rotvec(arm_command.angular * dt), arm.orientation),
        )
    hand_q = side.hand_q
    if hand_target is not None:
        target = model.check_dof(hand_target, "hand target")
        step = np.clip(target - hand_q, -hand_rate_limit * dt, hand_rate_limit * dt)
        hand_q = model.clamp(hand_q + step)
    return PlantSide(arm=arm, hand_q=hand_q)


# ---------------------------------------------------------------------------
# Demonstration frames and file format
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DemonstrationFrame:
    timestamp: float
    proprioception: np.ndarray  # (44,)
    action: np.ndarray  # (44,)
    success_label: bool | None = None
    observation: bytes = b""

    def __post_init__(self):
        for name in ("proprioception", "action"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if arr.shape[0] != PROPRIO_DIM:
                raise DemonstrationFormatError(
                    f"{name} must have exactly {PROPRIO_DIM} values, got {arr.shape[0]}"
                )
            object.__setattr__(self, name, arr)


def pack_state_vector(plant: PlantState) -> np.ndarray:
    """44-value layout: left arm pose, right arm pose, left hand, right hand."""
    parts = []
    for name in SIDES:
        side = plant.side(name)
        parts.append(side.arm.position)
        parts.append(side.arm.rotvec())
    for name in SIDES:
        parts.append(plant.side(name).hand_q)
    return np.concatenate(parts)


def pack_action_vector(arm_targets: dict[str, Pose], hand_targets: dict[str, np.ndarray]) -> np.ndarray:
    parts = []
    for name in SIDES:
        pose = arm_targets[name]
        parts.append(pose.position)
        parts.append(pose.rotvec())
    for name in SIDES:
        parts.append(np.asarray(hand_targets[name], dtype=float))
    return np.concatenate(parts)


def _encode_frame(frame: DemonstrationFrame) -> bytes:
    flags = 0
    if frame.success_label is not None:
        flags |= 1
        if frame.success_label:
            flags |= 2
    body = _FRAME_BODY.pack(
        frame.timestamp,
        *frame.proprioception.tolist(),
        *frame.action.tolist(),
        flags,
        len(frame.observation),
    ) + frame.observation
    return _LEN_PREFIX.pack(len(body)) + body


def _decode_frame(body: bytes, index: int) -> DemonstrationFrame:
    if len(body) < _FRAME_BODY.size:
        raise DemonstrationFormatError(f"frame {index} body truncated", frame_index=index)
    fields = _FRAME_BODY.unpack(body[: _FRAME_BODY.size])
    timestamp = fields[0]
    proprio = np.array(fields[1 : 1 + PROPRIO_DIM])
    action = np.array(fields[1 + PROPRIO_DIM : 1 + 2 * PROPRIO_DIM])
    flags = fields[-2]
    blob_len = fields[-1]
    blob = body[_FRAME_BODY.size :]
    if len(blob) != blob_len:
        raise DemonstrationFormatError(f"frame {index} observation blob truncated", frame_index=index)
    success = bool(flags & 2) if flags & 1 else None
    return DemonstrationFrame(
        timestamp=timestamp, proprioception=proprio, action=action, success_label=success, observation=blob
    )


def demo_header(
    hand_model: HandKinematicModel, library: Library | None, seed: int, loop_hz: float
) -> dict:
    return {
        "format": "demonstration",
        "schema_version": DEMO_SCHEMA_VERSION,
        "hand_model_id": hand_model.id,
        "library_hash": library_hash(library) if library is not None else "",
        "seed": int(seed),
        "loop_hz": float(loop_hz),
        "record_hz": RECORD_HZ,
        "proprioception_dim": PROPRIO_DIM,
    }


def write_demonstration(path: str | Path, header: dict, frames) -> None:
    blob = yaml.safe_dump(header, sort_keys=True).encode() + _HEADER_END.lstrip(b"\n")
    chunks = [blob]
    chunks.extend(_encode_frame(f) for f in frames)
    Path(path).write_bytes(b"".join(chunks))


def read_demonstration(path: str | Path) -> tuple[dict, list[DemonstrationFrame]]:
    raw = Path(path).read_bytes()
    if raw.startswith(b"...\n"):
        head, _, rest = raw.partition(b"...\n")
    else:
        head, sep, rest = raw.partition(_HEADER_END)
        if not sep:
            raise DemonstrationFormatError("no header terminator found")
        head += b"\n"
    try:
        header = yaml.safe_load(head.decode())
    except (UnicodeDecodeError, yaml.YAMLError) as exc:
        raise DemonstrationFormatError(f"unreadable header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != "demonstration":
        raise DemonstrationFormatError("not a demonstration file")
    if str(header.get("schema_version")) != DEMO_SCHEMA_VERSION:
        raise DemonstrationFormatError(
            f"unsupported demonstration schema version {header.get('schema_version')!r}"
        )
    frames = []
    offset = 0
    index = 0
    while offset < len(rest):
        if offset + _LEN_PREFIX.size > len(rest):
            raise DemonstrationFormatError(f"frame {index} length prefix truncated", frame_index=index)
        (length,) = _LEN_PREFIX.unpack_from(rest, offset)
        offset += _LEN_PREFIX.size
        if offset + length > len(rest):
            raise DemonstrationFormatError(f"frame {index} truncated", frame_index=index)
        frames.append(_decode_frame(rest[offset : offset + length], index))
        offset += length
        index += 1
    return header, frames


def replay(path: str | Path):
    """Frames in recorded order with their original timestamps."""
    _, frames = read_demonstration(path)
    yield from frames


class Recorder:
    """Samples tick-aligned snapshots at the recording cadence.

    Due frames are decided on the logical tick counter (tick * record_hz >=
    k * loop_hz), so a 10 s session at any loop rate yields exactly
    10 * record_hz frames with timestamps k / record_hz.
    """

    def __init__(self, loop_hz: float, record_hz: int = RECORD_HZ):
        self.loop_hz = loop_hz
        self.record_hz = record_hz
        self.frames: list[DemonstrationFrame] = []
        self._next = 0

    def maybe_record(self, tick: int, make_frame) -> int:
        """Record all frames due by logical tick; returns how many were added."""
        added = 0
        while self._next * self.loop_hz <= tick * self.record_hz + 1e-9:
            timestamp = self._next / self.record_hz
            self.frames.append(make_frame(timestamp))
            self._next += 1
            added += 1
        return added
