import numpy as np
import pytest

from dexteleop.errors import CalibrationError, TypeNotFoundError
from dexteleop.geometry import Pose
from dexteleop.mapping import (
    CalibrationPair,
    CompiledMapping,
    HumanHandFrame,
    MappingAssignment,
    compute_ratio,
    default_calibration,
    interpolate_joints,
    load_profile,
    map_frame,
    map_frame_compiled,
    posture_frame,
    save_profile,
)


def test_ratio_at_stretch_is_zero():
    assert compute_ratio([0.1, 0.2, 0.3], [0.1, 0.2, 0.3], [0.1, 0.2, 0.4]) == 0.0


def test_ratio_at_contract_is_one():
    assert compute_ratio([0.1, 0.2, 0.4], [0.1, 0.2, 0.3], [0.1, 0.2, 0.4]) == 1.0


def test_ratio_hand_oracle_half():
    # ((0.01,0,0.01)-(0,0,0)) . (0,0,0.02) / |(0,0,0.02)|^2 = 0.0002/0.0004
    assert compute_ratio([0.01, 0.0, 0.01], [0.0, 0.0, 0.0], [0.0, 0.0, 0.02]) == pytest.approx(0.5)


def test_ratio_clips_to_unit_interval():
    assert compute_ratio([0, 0, 0.05], [0, 0, 0], [0, 0, 0.02]) == 1.0
    assert compute_ratio([0, 0, -0.05], [0, 0, 0], [0, 0, 0.02]) == 0.0


def test_ratio_degenerate_pair_raises():
    with pytest.raises(CalibrationError):
        compute_ratio([0, 0, 0], [0, 0, 0], [0, 0, 0.0005])


def test_ratio_randomized_properties():
    rng = np.random.default_rng(41)
    for _ in range(2000):
        stretch = rng.normal(size=3)
        contract = stretch + rng.normal(size=3) * 0.1
        if np.linalg.norm(contract - stretch) <= 2e-3:
            continue
        current = rng.normal(size=3) * 0.2
        r = compute_ratio(current, stretch, contract)
        assert 0.0 <= r <= 1.0
        shift = rng.normal(size=3)
        r_shifted = compute_ratio(current + shift, stretch + shift, contract + shift)
        assert r_shifted == pytest.approx(r, abs=1e-9)


def test_ratio_scaling_invariance_about_stretch():
    rng = np.random.default_rng(43)
    for _ in range(500):
        stretch = rng.normal(size=3)
        b = rng.normal(size=3) * 0.1
        if np.linalg.norm(b) <= 2e-3:
            continue
        a = rng.normal(size=3) * 0.05
        r = compute_ratio(stretch + a, stretch, stretch + b)
        if not 0.0 < r < 1.0:
            continue
        s = rng.uniform(0.1, 5.0)
        assert compute_ratio(stretch + s * a, stretch, stretch + s * b) == pytest.approx(r, abs=1e-9)


def test_ratio_monotone_along_segment():
    stretch = np.array([0.0, 0.1, 0.0])
    contract = np.array([0.05, 0.1, -0.04])
    previous = -1.0
    for alpha in np.linspace(-0.3, 1.3, 60):
        r = compute_ratio(stretch + alpha * (contract - stretch), stretch, contract)
        assert r >= previous - 1e-12
        previous = r


def test_interpolate_endpoints_exact():
    stretch = np.array([0.1, -0.2, 0.5])
    contract = np.array([1.0, 0.3, 1.5])
    assert np.array_equal(interpolate_joints(0.0, stretch, contract), stretch)
    assert np.array_equal(interpolate_joints(1.0, stretch, contract), contract)


def test_interpolate_quarter_oracle():
    assert interpolate_joints(0.25, np.array([0.0]), np.array([1.6]))[0] == pytest.approx(0.4)


def test_interpolate_affine_midpoint():
    rng = np.random.default_rng(47)
    stretch = rng.normal(size=16)
    contract = rng.normal(size=16)
    mid = interpolate_joints(0.5, stretch, contract)
    assert np.allclose(mid, (stretch + contract) / 2, atol=1e-12)


def test_interpolate_rejects_out_of_range_ratio():
    with pytest.raises(ValueError):
        interpolate_joints(1.2, np.zeros(2), np.ones(2))


def test_map_frame_endpoints(library, hand_model):
    cal = default_calibration()
    assignment = MappingAssignment(type_id="cyl-thick")
    mtype = library.get_type("cyl-thick")

    q = map_frame(posture_frame(np.zeros(5), cal), assignment, cal, library, hand_model)
    assert np.allclose(q, mtype.stretch_posture, atol=1e-12)

    q = map_frame(posture_frame(np.ones(5), cal), assignment, cal, library, hand_model)
    assert np.allclose(q, mtype.contract_posture, atol=1e-12)


def test_map_frame_clips_past_contract(library, hand_model):
    cal = default_calibration()
    mtype = library.get_type("cyl-thick")
    tips = cal.p_contract + 2.0 * (cal.p_contract - cal.p_stretch)
    frame = HumanHandFrame(fingertips=tips, wrist=Pose.identity())
    q = map_frame(frame, MappingAssignment(type_id="cyl-thick"), cal, library, hand_model)
    assert np.allclose(q, mtype.contract_posture, atol=1e-12)


def test_map_frame_unknown_type(library, hand_model):
    cal = default_calibration()
    with pytest.raises(TypeNotFoundError):
        map_frame(posture_frame(np.zeros(5), cal), MappingAssignment(type_id="ghost"), cal, library, hand_model)


def test_map_frame_finger_count_mismatch(library, hand_model):
    cal = default_calibration()
    frame = HumanHandFrame(fingertips=np.zeros((3, 3)), wrist=Pose.identity())
    compiled = CompiledMapping.build(MappingAssignment(type_id="cyl-thick"), cal, library, hand_model)
    with pytest.raises(CalibrationError):
        map_frame_compiled(frame, compiled, cal)


def test_map_frame_bounded_output_delta(library, hand_model):
    # Continuity: small fingertip motion cannot jump the joints.
    cal = default_calibration()
    compiled = CompiledMapping.build(MappingAssignment(type_id="power-fist"), cal, library, hand_model)
    span = np.abs(compiled.contract - compiled.stretch)
    seg_len = np.min(np.linalg.norm(cal.p_contract - cal.p_stretch, axis=1))
    rng = np.random.default_rng(53)
    for _ in range(200):
        ratios = rng.random(5)
        frame_a = posture_frame(ratios, cal)
        eps = 1e-4
        tips_b = frame_a.fingertips + rng.normal(size=(5, 3)) * eps
        frame_b = HumanHandFrame(fingertips=tips_b, wrist=Pose.identity())
        qa, _ = map_frame_compiled(frame_a, compiled, cal)
        qb, _ = map_frame_compiled(frame_b, compiled, cal)
        # |dq| <= span * |d ratio| and |d ratio| <= |d tip| / seg_len
        bound = span * (np.sqrt(3) * eps * 4 / seg_len)
        assert np.all(np.abs(qa - qb) <= bound + 1e-12)


def test_map_frame_unlinked_joints_take_stretch(library, hand_model):
    cal = default_calibration()
    assignment = MappingAssignment(type_id="cyl-thick", linkage={"index": "index"})
    mtype = library.get_type("cyl-thick")
    q = map_frame(posture_frame(np.ones(5), cal), assignment, cal, library, hand_model)
    sl = hand_model.finger_slices[hand_model.finger_index("index")]
    assert np.allclose(q[sl], np.asarray(mtype.contract_posture)[sl])
    mask = np.ones(hand_model.dof, bool)
    mask[sl] = False
    assert np.allclose(q[mask], np.asarray(mtype.stretch_posture)[mask])


def test_calibration_rejects_degenerate_segment():
    stretch = np.zeros((5, 3))
    contract = np.zeros((5, 3))
    contract[:, 2] = 0.05
    contract[2] = stretch[2] + 1e-4
    with pytest.raises(CalibrationError) as err:
        CalibrationPair(p_stretch=stretch, p_contract=contract)
    assert "middle" in str(err.value)


def test_profile_round_trip(tmp_path):
    cal = default_calibration()
    path = tmp_path / "profile.tt"
    save_profile(path, {"op1": {"right": cal, "left": cal}})
    loaded = load_profile(path)
    got = loaded["op1"]["right"]
    assert np.allclose(got.p_stretch, cal.p_stretch)
    assert np.allclose(got.p_contract, cal.p_contract)
    assert got.fingers == cal.fingers
