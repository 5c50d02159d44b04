import numpy as np
import pytest

from dexteleop.arm import VelocityCommand
from dexteleop.assets import bundled_track_path
from dexteleop.errors import DemonstrationFormatError, LibraryFormatError
from dexteleop.geometry import Pose
from dexteleop.mapping import HumanHandFrame, default_calibration, posture_frame
from dexteleop.sim import (
    PROPRIO_DIM,
    DemonstrationFrame,
    PlantState,
    Recorder,
    ScriptedGloveTrack,
    demo_header,
    library_hash,
    load_track,
    read_demonstration,
    replay,
    save_track,
    step_plant,
    write_demonstration,
)


def make_frame(timestamp, fill=0.0):
    return DemonstrationFrame(
        timestamp=timestamp,
        proprioception=np.full(PROPRIO_DIM, fill),
        action=np.full(PROPRIO_DIM, fill + 0.5),
    )


def test_step_plant_noop(hand_model):
    plant = PlantState.initial(hand_model)
    side = step_plant(plant.right, None, plant.right.hand_q, dt=0.04, model=hand_model)
    assert np.array_equal(side.hand_q, plant.right.hand_q)
    assert side.arm.almost_equal(plant.right.arm)


def test_step_plant_hand_rate_limit_oracle(hand_model):
    plant = PlantState.initial(hand_model)
    target = plant.right.hand_q.copy()
    target[1] += 0.5
    side = step_plant(plant.right, None, target, dt=0.04, model=hand_model, hand_rate_limit=2.0)
    assert side.hand_q[1] - plant.right.hand_q[1] == pytest.approx(0.08, abs=1e-12)


def test_step_plant_arm_exact_integration(hand_model):
    plant = PlantState.initial(hand_model)
    side = plant.right
    command = VelocityCommand(linear=[0.2, 0.0, 0.0], angular=[0.0, 0.0, 0.0], tick=0)
    for _ in range(25):
        side = step_plant(side, command, None, dt=0.04, model=hand_model)
    assert side.arm.position[0] - plant.right.arm.position[0] == pytest.approx(0.2, abs=1e-12)


def test_step_plant_clamps_limits(hand_model):
    plant = PlantState.initial(hand_model)
    target = np.full(hand_model.dof, 100.0)
    side = plant.right
    for _ in range(2000):
        side = step_plant(side, None, target, dt=0.04, model=hand_model)
    assert hand_model.within_limits(side.hand_q)
    assert np.array_equal(side.hand_q, hand_model.upper)


def test_step_plant_rejects_bad_dt(hand_model):
    plant = PlantState.initial(hand_model)
    with pytest.raises(ValueError):
        step_plant(plant.right, None, None, dt=0.0, model=hand_model)


def test_track_round_trip(tmp_path):
    cal = default_calibration()
    frames = tuple(
        posture_frame(np.full(5, k / 9), cal, wrist=Pose.identity(), timestamp=k / 15)
        for k in range(10)
    )
    track = ScriptedGloveTrack(frames=frames, rate_hz=15.0, loop=True, hand="left")
    path = tmp_path / "test.track"
    save_track(track, path)
    loaded = load_track(path)
    assert loaded.rate_hz == 15.0 and loaded.loop and loaded.hand == "left"
    assert len(loaded.frames) == 10
    for a, b in zip(loaded.frames, frames):
        assert np.allclose(a.fingertips, b.fingertips)
        assert a.timestamp == pytest.approx(b.timestamp)


def test_track_frame_lookup_and_loop():
    cal = default_calibration()
    frames = tuple(posture_frame(np.zeros(5), cal, timestamp=k / 10) for k in range(5))
    clamped = ScriptedGloveTrack(frames=frames, rate_hz=10.0, loop=False)
    assert clamped.frame_at(10.0) is frames[-1]
    looped = ScriptedGloveTrack(frames=frames, rate_hz=10.0, loop=True)
    assert looped.frame_at(0.52) is frames[0]


def test_track_validation():
    cal = default_calibration()
    with pytest.raises(LibraryFormatError):
        ScriptedGloveTrack(frames=(), rate_hz=10.0)
    same_time = (
        posture_frame(np.zeros(5), cal, timestamp=0.0),
        posture_frame(np.zeros(5), cal, timestamp=0.0),
    )
    with pytest.raises(LibraryFormatError):
        ScriptedGloveTrack(frames=same_time, rate_hz=10.0)
    mixed = (
        posture_frame(np.zeros(5), cal, timestamp=0.0),
        HumanHandFrame(fingertips=np.zeros((3, 3)), wrist=Pose.identity(), timestamp=0.1),
    )
    with pytest.raises(LibraryFormatError):
        ScriptedGloveTrack(frames=mixed, rate_hz=10.0)


def test_bundled_track_loads():
    track = load_track(bundled_track_path("pour"))
    assert track.duration == pytest.approx(6.0)
    assert track.frames[0].fingertips.shape == (5, 3)


def test_demo_frame_requires_44_values():
    with pytest.raises(DemonstrationFormatError):
        DemonstrationFrame(timestamp=0.0, proprioception=np.zeros(43), action=np.zeros(44))
    with pytest.raises(DemonstrationFormatError):
        DemonstrationFrame(timestamp=0.0, proprioception=np.zeros(44), action=np.zeros(40))


def test_demo_file_round_trip(tmp_path, hand_model, library):
    header = demo_header(hand_model, library, seed=7, loop_hz=25.0)
    frames = [make_frame(k / 15, fill=k * 0.01) for k in range(20)]
    frames[3] = DemonstrationFrame(
        timestamp=frames[3].timestamp,
        proprioception=frames[3].proprioception,
        action=frames[3].action,
        success_label=True,
        observation=b"blob-bytes",
    )
    path = tmp_path / "demo.bin"
    write_demonstration(path, header, frames)
    got_header, got_frames = read_demonstration(path)
    assert got_header["hand_model_id"] == hand_model.id
    assert got_header["library_hash"] == library_hash(library)
    assert len(got_frames) == 20
    for a, b in zip(got_frames, frames):
        assert a.timestamp == b.timestamp
        assert np.array_equal(a.proprioception, b.proprioception)
        assert np.array_equal(a.action, b.action)
        assert a.success_label == b.success_label
        assert a.observation == b.observation


def test_demo_replay_order(tmp_path, hand_model):
    path = tmp_path / "demo.bin"
    write_demonstration(path, demo_header(hand_model, None, 0, 25.0), [make_frame(k / 15) for k in range(5)])
    stamps = [f.timestamp for f in replay(path)]
    assert stamps == [k / 15 for k in range(5)]


def test_demo_empty_file_needs_valid_header(tmp_path, hand_model):
    path = tmp_path / "empty.bin"
    write_demonstration(path, demo_header(hand_model, None, 0, 25.0), [])
    header, frames = read_demonstration(path)
    assert frames == []
    assert header["format"] == "demonstration"

    bare = tmp_path / "bare.bin"
    bare.write_bytes(b"")
    with pytest.raises(DemonstrationFormatError):
        read_demonstration(bare)


def test_demo_truncated_reports_frame_index(tmp_path, hand_model):
    path = tmp_path / "demo.bin"
    write_demonstration(path, demo_header(hand_model, None, 0, 25.0), [make_frame(k / 15) for k in range(4)])
    raw = path.read_bytes()
    cut = tmp_path / "cut.bin"
    cut.write_bytes(raw[:-30])
    with pytest.raises(DemonstrationFormatError) as err:
        read_demonstration(cut)
    assert err.value.frame_index == 3


def test_demo_version_mismatch(tmp_path, hand_model):
    path = tmp_path / "demo.bin"
    header = demo_header(hand_model, None, 0, 25.0)
    header["schema_version"] = "99"
    write_demonstration(path, header, [])
    with pytest.raises(DemonstrationFormatError):
        read_demonstration(path)


def test_demo_write_is_deterministic(tmp_path, hand_model, library):
    frames = [make_frame(k / 15, fill=np.sin(k)) for k in range(30)]
    header = demo_header(hand_model, library, seed=42, loop_hz=25.0)
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    write_demonstration(a, header, frames)
    write_demonstration(b, header, frames)
    assert a.read_bytes() == b.read_bytes()


def test_recorder_cadence_exact_150_frames():
    recorder = Recorder(loop_hz=25.0)
    for tick in range(250):  # 10 s of logical time
        recorder.maybe_record(tick, lambda t: make_frame(t))
    assert len(recorder.frames) == 150
    stamps = [f.timestamp for f in recorder.frames]
    assert stamps == [k / 15 for k in range(150)]


def test_recorder_cadence_other_rate():
    recorder = Recorder(loop_hz=50.0)
    for tick in range(500):
        recorder.maybe_record(tick, lambda t: make_frame(t))
    assert len(recorder.frames) == 150
