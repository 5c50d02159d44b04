"""Operator session: wire protocol, state machine, and the engine tick loop.

The engine owns the session state and advances on a logical 25 Hz clock;
device producers and the server post messages into thread-safe queues that
are drained between ticks, so a type switch can never change joints
mid-tick and a slow retrieval can never stall the loop.  Snapshots for the
console are published at the recording cadence (15 Hz).
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .arm import ControllerConfig, ControlState, VelocityCommand, control_step
from .errors import (
    CalibrationError,
    EngineError,
    IkConvergenceError,
    IllegalTransitionError,
    LibraryValidationError,
    ProtocolError,
    TypeNotFoundError,
)
from .geometry import Pose
from .hand import HandKinematicModel, adjust_type, skeleton_points
from .library import Library, TaxonomyPath, TypeAttributes, load_library, merge_libraries, save_library
from .mapping import (
    HUMAN_FINGERS,
    CalibrationPair,
    CompiledMapping,
    HumanHandFrame,
    MappingAssignment,
    default_calibration,
    map_frame_compiled,
)
from .retrieval import ManipulationPlan, RetrievalBackend, TaskRequest, retrieve
from .sim import (
    PlantState,
    Recorder,
    ScriptedGloveTrack,
    DemonstrationFrame,
    demo_header,
    pack_action_vector,
    pack_state_vector,
    step_plant,
    write_demonstration,
)
from .teach import AdmittanceParams, ForceGains, TeachError, TeachSession, record_type

PROTOCOL_VERSION = "1"
MODES = ("idle", "teleoperate", "teach", "replay")
HANDS = ("left", "right")

MESSAGE_KINDS = (
    "snapshot",
    "select_type",
    "adjust_fingertip",
    "command_text",
    "calibrate",
    "teach_control",
    "glove_frame",
    "plan_notice",
    "error",
)
INBOUND_KINDS = (
    "select_type",
    "adjust_fingertip",
    "command_text",
    "calibrate",
    "teach_control",
    "glove_frame",
)


@dataclass(frozen=True)
class ProtocolMessage:
    kind: str
    payload: dict
    seq: int = 0


def encode_message(msg: ProtocolMessage) -> str:
    return json.dumps({"kind": msg.kind, "seq": msg.seq, "payload": msg.payload}, sort_keys=True)


def decode_message(text) -> ProtocolMessage:
    """Parse one wire frame; raises ProtocolError on any malformation."""
    if isinstance(text, bytes):
        try:
            text = text.decode()
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"frame is not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ProtocolError(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProtocolError("frame must be a JSON object")
    kind = doc.get("kind")
    if kind not in MESSAGE_KINDS:
        raise ProtocolError(f"unknown message kind {kind!r}", field="kind")
    seq = doc.get("seq", 0)
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise ProtocolError("seq must be a non-negative integer", field="seq")
    payload = doc.get("payload", {})
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be an object", field="payload")
    return ProtocolMessage(kind=kind, payload=payload, seq=seq)


@dataclass(frozen=True)
class SessionConfig:
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    snapshot_hz: int = 15
    type_switch_ramp_s: float = 0.5
    hand_rate_limit: float = 2.0
    auto_apply_plans: bool = False
    admittance: AdmittanceParams = field(default_factory=lambda: AdmittanceParams(dt=0.04))
    force_gains: ForceGains = field(default_factory=ForceGains)
    operator: str = "default"


class LatestValue:
    """Single-writer latest-value slot; readers never block the writer."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = None

    def set(self, value) -> None:
        with self._lock:
            self._value = value

    def get(self):
        with self._lock:
            return self._value


@dataclass
class _ActiveType:
    type_id: str
    compiled: CompiledMapping
    assignment: MappingAssignment
    ramp_from: np.ndarray | None = None
    ramp_start: int = 0


def _parse_vec(payload, key, n):
    try:
        vec = np.asarray(payload[key], dtype=float).reshape(n)
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"payload field {key!r} must be a length-{n} number array", field=key) from exc
    if not np.all(np.isfinite(vec)):
        raise ProtocolError(f"payload field {key!r} must be finite", field=key)
    return vec


def _parse_hand(payload, allow_both=False):
    hand = payload.get("hand")
    allowed = HANDS + (("both",) if allow_both else ())
    if hand not in allowed:
        raise ProtocolError(f"payload field 'hand' must be one of {allowed}", field="hand")
    return hand


class Engine:
    """Single-operator session engine driven by a logical clock.

    All mutation happens on the tick thread; `post` and glove slots are the
    only cross-thread entry points.
    """

    def __init__(
        self,
        hand_model: HandKinematicModel,
        library: Library,
        config: SessionConfig | None = None,
        backend: RetrievalBackend | None = None,
        seed: int = 0,
        user_library_path=None,
    ):
        self.hand_model = hand_model
        self.library = library
        # Taught types live in a separate user file, merged over the
        # read-only bundled library on load.
        self.user_library_path = Path(user_library_path) if user_library_path else None
        self._user_types: list = []
        if self.user_library_path is not None and self.user_library_path.exists():
            user = load_library(self.user_library_path, hand_model)
            self._user_types = list(user.types)
            self.library = merge_libraries(library, user)
        self.config = config or SessionConfig()
        self.backend = backend or RetrievalBackend()
        self.seed = seed
        self.rng = np.random.default_rng(seed)

        self.mode = "idle"
        self.plant = PlantState.initial(hand_model)
        self.arm_states = {side: ControlState.at_rest(self.plant.side(side).arm) for side in HANDS}
        self.calibrations = {side: default_calibration() for side in HANDS}
        self.active: dict[str, _ActiveType | None] = {side: None for side in HANDS}
        self.ratios: dict[str, dict[str, float]] = {side: {} for side in HANDS}
        self.hand_targets = {side: self.plant.side(side).hand_q.copy() for side in HANDS}
        self.glove_slots = {side: LatestValue() for side in HANDS}
        self.tracks: dict[str, ScriptedGloveTrack | None] = {side: None for side in HANDS}

        self.teach: TeachSession | None = None
        self.teach_hand = "right"
        self.teach_force = np.zeros(hand_model.dof)

        self.recorder: Recorder | None = None
        self.plan: ManipulationPlan | None = None
        self.library_rev = 0
        self.tick_count = 0

        self._inbound: deque[ProtocolMessage] = deque()
        self._events: deque[tuple] = deque()
        self._outbound: deque[ProtocolMessage] = deque()
        self._queue_lock = threading.Lock()
        self._out_seq = 0
        self._snapshot_next = 0
        self.retrievals_in_flight = 0

    # -- queues -----------------------------------------------------------

    def post(self, msg: ProtocolMessage) -> None:
        with self._queue_lock:
            self._inbound.append(msg)

    def _push_event(self, event: tuple) -> None:
        with self._queue_lock:
            self._events.append(event)

    def poll_outbound(self) -> list[ProtocolMessage]:
        out = []
        while self._outbound:
            out.append(self._outbound.popleft())
        return out

    def _emit(self, kind: str, payload: dict) -> ProtocolMessage:
        msg = ProtocolMessage(kind=kind, payload=payload, seq=self._out_seq)
        self._out_seq += 1
        self._outbound.append(msg)
        return msg

    def _error(self, message: str, code: str, field_name: str = "") -> ProtocolMessage:
        payload = {"message": message, "code": code}
        if field_name:
            payload["field"] = field_name
        return self._emit("error", payload)

    # -- message handling ---------------------------------------------------

    def handle_raw(self, text) -> list[ProtocolMessage]:
        """Decode and handle one wire frame; never raises on bad input."""
        try:
            msg = decode_message(text)
        except ProtocolError as exc:
            return [self._error(str(exc), "protocol", exc.field)]
        return self.handle_message(msg)

    def handle_message(self, msg: ProtocolMessage) -> list[ProtocolMessage]:
        """State-machine transition for one inbound message.

        Returns the outbound messages produced (also queued for pickup).
        Illegal transitions and invalid payloads leave the session unchanged
        and produce a structured error message.
        """
        before = len(self._outbound)
        try:
            if msg.kind not in INBOUND_KINDS:
                self._error(f"clients may not send {msg.kind!r}", "protocol", "kind")
            else:
                getattr(self, f"_on_{msg.kind}")(msg.payload)
        except ProtocolError as exc:
            self._error(str(exc), "protocol", exc.field)
        except IllegalTransitionError as exc:
            self._error(str(exc), "illegal-transition")
        except EngineError as exc:
            self._error(str(exc), "engine")
        return list(self._outbound)[before:]

    def _on_select_type(self, payload: dict) -> None:
        type_id = payload.get("type_id")
        if type_id is None:
            self._reset()
            return
        hand = _parse_hand(payload, allow_both=True)
        if self.mode not in ("idle", "teleoperate"):
            raise IllegalTransitionError(
                f"select_type is not allowed in mode {self.mode!r} (reset first)"
            )
        try:
            self.library.get_type(str(type_id))
        except TypeNotFoundError as exc:
            self._error(str(exc), "type-not-found", "type_id")
            return
        linkage = payload.get("linkage")
        sides = HANDS if hand == "both" else (hand,)
        for side in sides:
            assignment = (
                MappingAssignment(type_id=str(type_id), linkage=dict(linkage))
                if linkage
                else MappingAssignment(type_id=str(type_id))
            )
            compiled = CompiledMapping.build(
                assignment, self.calibrations[side], self.library, self.hand_model
            )
            self.active[side] = _ActiveType(
                type_id=str(type_id),
                compiled=compiled,
                assignment=assignment,
                ramp_from=self.plant.side(side).hand_q.copy(),
                ramp_start=self.tick_count,
            )
        self.mode = "teleoperate"

    def _reset(self) -> None:
        self.mode = "idle"
        self.active = {side: None for side in HANDS}
        self.ratios = {side: {} for side in HANDS}
        self.teach = None
        self.teach_force = np.zeros(self.hand_model.dof)

    def _on_adjust_fingertip(self, payload: dict) -> None:
        hand = _parse_hand(payload)
        active = self.active[hand]
        if self.mode != "teleoperate" or active is None:
            raise IllegalTransitionError("adjust_fingertip requires an active type in teleoperate mode")
        finger = payload.get("finger")
        if finger not in self.hand_model.finger_names:
            raise ProtocolError(
                f"finger must be one of {self.hand_model.finger_names}", field="finger"
            )
        delta = Pose.from_rotvec(
            _parse_vec(payload, "translation", 3), _parse_vec(payload, "rotation", 3)
        )
        try:
            new_stretch = adjust_type(self.hand_model, active.compiled.stretch, finger, delta)
            new_contract = adjust_type(self.hand_model, active.compiled.contract, finger, delta)
        except IkConvergenceError as exc:
            self._error(str(exc), "ik-nonconvergence")
            return
        active.compiled = replace(active.compiled, stretch=new_stretch, contract=new_contract)

    def _on_command_text(self, payload: dict) -> None:
        text = payload.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ProtocolError("command_text payload needs a non-empty 'text'", field="text")
        image = payload.get("image_b64")
        if image is not None and not isinstance(image, str):
            raise ProtocolError("image_b64 must be a base64 string", field="image_b64")
        request = TaskRequest(command_text=text, scene_image_b64=image, hands="both")
        backend = self.backend
        library = self.library
        self.retrievals_in_flight += 1

        def work():
            try:
                plan = retrieve(request, backend, library)
                self._push_event(("plan", plan, backend.kind, text))
            except EngineError as exc:
                self._push_event(("retrieval-error", str(exc)))

        threading.Thread(target=work, daemon=True).start()

    def _on_calibrate(self, payload: dict) -> None:
        hand = _parse_hand(payload)
        try:
            stretch = np.asarray(payload["p_stretch"], dtype=float)
            contract = np.asarray(payload["p_contract"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"calibrate payload malformed: {exc}") from exc
        try:
            self.calibrations[hand] = CalibrationPair(p_stretch=stretch, p_contract=contract)
        except CalibrationError as exc:
            self._error(str(exc), "calibration")

    def _on_teach_control(self, payload: dict) -> None:
        action = payload.get("action")
        if action == "start":
            if self.mode != "teleoperate":
                raise IllegalTransitionError(
                    f"teach recording starts from teleoperate mode, not {self.mode!r}"
                )
            self.teach_hand = payload.get("hand", "right")
            if self.teach_hand not in HANDS:
                raise ProtocolError("teach hand must be left or right", field="hand")
            self.teach = TeachSession(
                model=self.hand_model,
                base_posture=self.plant.side(self.teach_hand).hand_q.copy(),
                params=self.config.admittance,
                gains=self.config.force_gains,
            )
            self.teach_force = np.zeros(self.hand_model.dof)
            self.mode = "teach"
            return
        if action == "push":
            if self.mode != "teach" or self.teach is None:
                raise IllegalTransitionError("push requires an active teach recording")
            self.teach_force = _parse_vec(payload, "force", self.hand_model.dof)
            return
        if action in ("mark_stretch", "mark_contract"):
            if self.mode != "teach" or self.teach is None:
                raise IllegalTransitionError(f"{action} requires an active teach recording")
            if action == "mark_stretch":
                self.teach.mark_stretch()
            else:
                self.teach.mark_contract()
            return
        if action == "save":
            if self.mode != "teach" or self.teach is None:
                raise IllegalTransitionError("save requires an active teach recording")
            self._save_taught_type(payload)
            return
        if action == "stop":
            if self.mode != "teach":
                raise IllegalTransitionError(f"teach stop is illegal in mode {self.mode!r}")
            self.teach = None
            self.mode = "idle"
            return
        raise ProtocolError(f"unknown teach_control action {action!r}", field="action")

    def _save_taught_type(self, payload: dict) -> None:
        try:
            attrs = payload["attributes"]
            attributes = TypeAttributes(
                hand_posture=attrs["hand_posture"],
                object_categories=tuple(attrs["object_categories"]),
                contact_parts=tuple(attrs["contact_parts"]),
                part_geometry=tuple(attrs["part_geometry"]),
                grasp_direction=attrs["grasp_direction"],
                purpose=attrs["purpose"],
            )
            category = TaxonomyPath(payload["category"]["top"], payload["category"]["sub"])
            type_id = payload["type_id"]
            name = payload["name"]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"save payload malformed: {exc}") from exc
        except LibraryValidationError as exc:
            self._error(str(exc), "validation")
            return
        try:
            self.library = record_type(
                self.teach.trajectory,
                self.teach.stretch_index,
                self.teach.contract_index,
                type_id=type_id,
                name=name,
                category=category,
                attributes=attributes,
                library=self.library,
                hand_model=self.hand_model,
                handedness=payload.get("handedness", "either"),
            )
        except (TeachError, LibraryValidationError) as exc:
            self._error(str(exc), "validation")
            return
        self.library_rev += 1
        self._user_types.append(self.library.get_type(type_id))
        if self.user_library_path is not None:
            save_library(
                Library(types=tuple(self._user_types), hand_model_id=self.hand_model.id),
                self.user_library_path,
            )

    def _on_glove_frame(self, payload: dict) -> None:
        hand = _parse_hand(payload)
        tips = np.asarray(payload.get("fingertips"), dtype=float)
        if tips.shape != (len(HUMAN_FINGERS), 3):
            raise ProtocolError(
                f"fingertips must be {len(HUMAN_FINGERS)}x3 positions", field="fingertips"
            )
        wrist_doc = payload.get("wrist") or {}
        wrist = Pose.from_rotvec(
            np.asarray(wrist_doc.get("position", (0.0, 0.0, 0.0)), dtype=float),
            np.asarray(wrist_doc.get("rotvec", (0.0, 0.0, 0.0)), dtype=float),
        )
        frame = HumanHandFrame(fingertips=tips, wrist=wrist, timestamp=float(payload.get("t", 0.0)))
        self.glove_slots[hand].set(frame)

    # -- tick loop ----------------------------------------------------------

    def set_track(self, side: str, track: ScriptedGloveTrack | None) -> None:
        self.tracks[side] = track

    def start_recording(self) -> None:
        self.recorder = Recorder(loop_hz=self.config.controller.loop_hz)

    def save_recording(self, path) -> int:
        if self.recorder is None:
            raise EngineError("no recording in progress")
        header = demo_header(
            self.hand_model, self.library, seed=self.seed, loop_hz=self.config.controller.loop_hz
        )
        write_demonstration(path, header, self.recorder.frames)
        count = len(self.recorder.frames)
        self.recorder = None
        return count

    def _drain_events(self) -> None:
        while True:
            with self._queue_lock:
                if not self._events:
                    return
                event = self._events.popleft()
            if event[0] == "plan":
                _, plan, source, text = event
                self.plan = plan
                applied = False
                if self.config.auto_apply_plans and self.mode in ("idle", "teleoperate"):
                    step = plan.steps[0]
                    for side, type_id in (("left", step.left_type), ("right", step.right_type)):
                        if type_id is not None:
                            self._on_select_type({"type_id": type_id, "hand": side})
                    applied = True
                self.retrievals_in_flight -= 1
                self._emit(
                    "plan_notice",
                    {
                        "plan": _plan_payload(plan),
                        "source": source,
                        "request_text": text,
                        "applied": applied,
                    },
                )
            elif event[0] == "retrieval-error":
                self.retrievals_in_flight -= 1
                self._error(event[1], "retrieval")

    def _drain_inbound(self) -> None:
        while True:
            with self._queue_lock:
                if not self._inbound:
                    return
                msg = self._inbound.popleft()
            self.handle_message(msg)

    def _glove_frame_for(self, side: str, t: float) -> HumanHandFrame | None:
        track = self.tracks[side]
        if track is not None and track.hand == side:
            return track.frame_at(t)
        return self.glove_slots[side].get()

    def _hand_target_for(self, side: str) -> np.ndarray | None:
        if self.mode == "teach" and self.teach is not None and side == self.teach_hand:
            return self.teach.step_force(self.teach_force)
        active = self.active[side]
        if self.mode != "teleoperate" or active is None:
            return None
        frame = self._glove_frame_for(side, self.tick_count * self.config.controller.dt)
        if frame is None:
            return None
        mapped, ratios = map_frame_compiled(frame, active.compiled, self.calibrations[side])
        self.ratios[side] = {
            finger: float(r) for finger, r in zip(self.calibrations[side].fingers, ratios)
        }
        target = mapped
        if active.ramp_from is not None:
            ramp_ticks = max(1.0, self.config.type_switch_ramp_s * self.config.controller.loop_hz)
            alpha = (self.tick_count - active.ramp_start) / ramp_ticks
            if alpha >= 1.0:
                active.ramp_from = None
            else:
                target = (1.0 - alpha) * active.ramp_from + alpha * mapped
        # Wrist pose drives the arm target for this side.
        self.arm_states[side] = replace(self.arm_states[side], target=frame.wrist)
        return target

    def tick(self) -> dict[str, VelocityCommand]:
        """Advance one control period; emits exactly one command per arm."""
        self._drain_events()
        self._drain_inbound()
        commands: dict[str, VelocityCommand] = {}
        for side in HANDS:
            target = self._hand_target_for(side)
            if target is not None:
                self.hand_targets[side] = np.asarray(target, dtype=float)
            arm_state, command = control_step(self.arm_states[side], self.config.controller)
            commands[side] = command
            new_side = step_plant(
                self.plant.side(side),
                command,
                self.hand_targets[side],
                dt=self.config.controller.dt,
                model=self.hand_model,
                hand_rate_limit=self.config.hand_rate_limit,
            )
            self.plant = self.plant.with_side(side, new_side)
            self.arm_states[side] = replace(arm_state, current=new_side.arm)
        if self.recorder is not None:
            self.recorder.maybe_record(self.tick_count, self._demo_frame)
        while self._snapshot_next * self.config.controller.loop_hz <= self.tick_count * self.config.snapshot_hz + 1e-9:
            self._snapshot_next += 1
            self.publish_snapshot()
        self.tick_count += 1
        return commands

    def run_ticks(self, n: int) -> list[dict[str, VelocityCommand]]:
        return [self.tick() for _ in range(n)]

    def _demo_frame(self, timestamp: float) -> DemonstrationFrame:
        return DemonstrationFrame(
            timestamp=timestamp,
            proprioception=pack_state_vector(self.plant),
            action=pack_action_vector(
                {side: self.arm_states[side].target for side in HANDS},
                {side: self.hand_targets[side] for side in HANDS},
            ),
        )

    # -- snapshots ----------------------------------------------------------

    def publish_snapshot(self, full: bool = False) -> ProtocolMessage:
        """Queue a snapshot for broadcast (at most snapshot_hz from the loop)."""
        return self._emit("snapshot", self._snapshot_payload(full))

    def snapshot_message(self, full: bool = False) -> ProtocolMessage:
        """Snapshot addressed to a single client; sequenced but not broadcast."""
        msg = ProtocolMessage(kind="snapshot", payload=self._snapshot_payload(full), seq=self._out_seq)
        self._out_seq += 1
        return msg

    def reject(self, message: str, code: str = "protocol", field_name: str = "") -> ProtocolMessage:
        """Queue a structured error (used by transports for frame-level rejects)."""
        return self._error(message, code, field_name)

    def _snapshot_payload(self, full: bool = False) -> dict:
        payload = {
            "protocol_version": PROTOCOL_VERSION,
            "mode": self.mode,
            "tick": self.tick_count,
            "recording": self.recorder is not None,
            "library_rev": self.library_rev,
            "plan": _plan_payload(self.plan) if self.plan else None,
            "hands": {side: self._hand_payload(side) for side in HANDS},
        }
        if full:
            payload["hand_model_id"] = self.hand_model.id
            payload["library"] = _library_payload(self.library)
            payload["calibration"] = {
                side: {
                    "fingers": list(cal.fingers),
                    "p_stretch": cal.p_stretch.tolist(),
                    "p_contract": cal.p_contract.tolist(),
                }
                for side, cal in self.calibrations.items()
            }
        return payload

    def _hand_payload(self, side: str) -> dict:
        plant_side = self.plant.side(side)
        active = self.active[side]
        return {
            "active_type": active.type_id if active else None,
            "joints": plant_side.hand_q.tolist(),
            "ratios": self.ratios[side],
            "arm": {
                "position": plant_side.arm.position.tolist(),
                "rotvec": plant_side.arm.rotvec().tolist(),
            },
            "skeleton": skeleton_points(self.hand_model, plant_side.hand_q),
        }


def _plan_payload(plan: ManipulationPlan) -> dict:
    return {
        "steps": [
            {"description": s.description, "left_type": s.left_type, "right_type": s.right_type}
            for s in plan.steps
        ]
    }


def _library_payload(library: Library) -> list[dict]:
    return [
        {
            "id": t.id,
            "name": t.name,
            "category": {"top": t.category.top, "sub": t.category.sub},
            "handedness": t.handedness,
            "attributes": {
                "hand_posture": t.attributes.hand_posture,
                "object_categories": list(t.attributes.object_categories),
                "contact_parts": list(t.attributes.contact_parts),
                "part_geometry": list(t.attributes.part_geometry),
                "grasp_direction": t.attributes.grasp_direction,
                "purpose": t.attributes.purpose,
            },
        }
        for t in library.types
    ]


def run_scripted_session(
    engine: Engine,
    track: ScriptedGloveTrack,
    type_id: str,
    duration_s: float | None = None,
    record: bool = True,
) -> int:
    """Drive a deterministic teleoperation session from a glove track.

    Selects the type, attaches the track to its hand, and runs the logical
    clock for the track duration (or ``duration_s``).  Returns the number
    of ticks executed.
    """
    hand = track.hand
    engine.set_track(hand, track)
    out = engine.handle_message(
        ProtocolMessage(kind="select_type", payload={"type_id": type_id, "hand": hand})
    )
    for msg in out:
        if msg.kind == "error":
            raise EngineError(msg.payload["message"])
    if record:
        engine.start_recording()
    seconds = duration_s if duration_s is not None else track.duration
    ticks = int(round(seconds * engine.config.controller.loop_hz))
    engine.run_ticks(ticks)
    return ticks
