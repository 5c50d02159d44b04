import numpy as np
import pytest

from dexteleop.arm import (
    ControllerConfig,
    ControlState,
    KalmanConfig,
    KalmanState,
    control_step,
    convergence_tick_bound,
    kalman_smooth,
    plan_rotation,
    plan_translation,
)
from dexteleop.geometry import Pose, quat_from_rotvec, rotation_distance

CFG = ControllerConfig()


def triangular_peak_oracle(distance, accel):
    """Continuous-time closed form: accelerate half the distance, decelerate half."""
    return np.sqrt(accel * distance)


def run_to_target(state, config, ticks, rng=None):
    commands = []
    for _ in range(ticks):
        state, cmd = control_step(state, config, rng=rng)
        commands.append(cmd)
    return state, commands


def test_translation_zero_error_gives_zero():
    state = ControlState.at_rest(Pose.identity())
    assert np.array_equal(plan_translation(state, CFG), np.zeros(3))


def test_translation_cruise_speed_is_paper_constant():
    target = Pose(np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0, 0.0]))
    state = ControlState(current=Pose.identity(), target=target)
    speeds = []
    for _ in range(100):
        state, cmd = control_step(state, CFG)
        speeds.append(float(np.linalg.norm(cmd.linear)))
    # Accel phase takes v/a = 0.4 s = 10 ticks; afterwards the cap binds.
    assert speeds[30] == 0.2
    assert max(speeds) == 0.2


def test_translation_short_move_triangular_peak():
    target = Pose(np.array([0.01, 0.0, 0.0]), np.array([1.0, 0.0, 0.0, 0.0]))
    state = ControlState(current=Pose.identity(), target=target)
    state, commands = run_to_target(state, CFG, 60)
    peak = max(float(np.linalg.norm(c.linear)) for c in commands)
    oracle = triangular_peak_oracle(0.01, CFG.a_trans)
    assert oracle == pytest.approx(0.0707, abs=1e-3)
    # Discretization can only undershoot the continuous peak, by at most one
    # acceleration increment.
    assert peak <= oracle + 1e-12
    assert peak >= oracle - CFG.a_trans * CFG.dt


def test_rotation_zero_error_gives_zero():
    state = ControlState.at_rest(Pose.identity())
    assert np.array_equal(plan_rotation(state, CFG), np.zeros(3))


def test_rotation_clamped_at_bound():
    target = Pose(np.zeros(3), quat_from_rotvec([0.0, 0.0, np.pi / 2]))
    state = ControlState(current=Pose.identity(), target=target)
    w = plan_rotation(state, CFG)
    assert np.linalg.norm(w) == pytest.approx(min(1.0 * np.pi / 2, 0.5), abs=1e-12)


def test_rotation_proportional_when_small():
    target = Pose(np.zeros(3), quat_from_rotvec([0.1, 0.0, 0.0]))
    state = ControlState(current=Pose.identity(), target=target)
    w = plan_rotation(state, CFG)
    assert np.linalg.norm(w) == pytest.approx(0.1, abs=1e-12)
    assert w[0] > 0


def test_rotation_monotone_in_error_up_to_bound():
    previous = 0.0
    for err in np.linspace(0.01, np.pi, 40):
        target = Pose(np.zeros(3), quat_from_rotvec([0.0, err, 0.0]))
        state = ControlState(current=Pose.identity(), target=target)
        w = float(np.linalg.norm(plan_rotation(state, CFG)))
        assert w >= previous - 1e-12
        assert w <= CFG.w_max_rot + 1e-12
        previous = w


def reference_recursion(samples, q, r, x0=0.0, p0=1.0):
    """Straight-line scalar Kalman recursion used as the independent oracle."""
    x, p = x0, p0
    out = []
    for z in samples:
        p = p + q
        k = p / (p + r)
        x = x + k * (z - x)
        p = (1 - k) * p
        out.append(x)
    return np.array(out)


def test_kalman_matches_reference_recursion():
    rng = np.random.default_rng(101)
    samples = 0.15 + rng.normal(0, 0.02, size=1000)
    cfg = KalmanConfig()
    state = KalmanState.initial(axes=1)
    got = []
    for z in samples:
        state, smoothed = kalman_smooth(state, [z], cfg)
        got.append(smoothed[0])
        assert np.all(state.covariance > 0)
    expected = reference_recursion(samples, cfg.process_var, cfg.measurement_var)
    assert np.max(np.abs(np.array(got) - expected)) <= 1e-12


def test_kalman_noiseless_constant_converges():
    cfg = KalmanConfig()
    state = KalmanState.initial(axes=1)
    for _ in range(400):
        state, smoothed = kalman_smooth(state, [0.125], cfg)
    assert smoothed[0] == pytest.approx(0.125, abs=1e-6)


def test_kalman_first_sample_dominates_large_prior():
    state = KalmanState.initial(axes=1, prior_var=1.0)
    _, smoothed = kalman_smooth(state, [0.3], KalmanConfig())
    assert smoothed[0] == pytest.approx(0.3, rel=0.02)


def test_kalman_reduces_rmse_on_noisy_constant():
    rng = np.random.default_rng(7)
    truth = 0.1
    samples = truth + rng.normal(0, 0.03, size=1000)
    state = KalmanState.initial(axes=1)
    smoothed = []
    for z in samples:
        state, s = kalman_smooth(state, [z], KalmanConfig())
        smoothed.append(s[0])
    smoothed = np.array(smoothed)
    warm = slice(50, None)  # skip the prior transient
    rmse_raw = np.sqrt(np.mean((samples[warm] - truth) ** 2))
    rmse_smooth = np.sqrt(np.mean((smoothed[warm] - truth) ** 2))
    assert rmse_smooth < rmse_raw


def test_control_step_idle_is_stationary():
    state = ControlState.at_rest(Pose.identity())
    state, cmd = control_step(state, CFG)
    assert np.array_equal(cmd.linear, np.zeros(3))
    assert np.array_equal(cmd.angular, np.zeros(3))
    assert np.array_equal(state.current.position, np.zeros(3))


def test_control_step_one_command_per_tick():
    state = ControlState.at_rest(Pose.identity())
    _, commands = run_to_target(state, CFG, 25)
    assert [c.tick for c in commands] == list(range(25))


def test_control_step_converges_without_overshoot():
    target = Pose(np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0, 0.0]))
    state = ControlState(current=Pose.identity(), target=target)
    bound = convergence_tick_bound(1.0, 0.0, CFG)
    overshoot = 0.0
    for _ in range(bound):
        state, _ = control_step(state, CFG)
        overshoot = max(overshoot, float(state.current.position[0]) - 1.0)
    assert abs(state.current.position[0] - 1.0) < 1e-3
    assert overshoot <= 1e-3


def test_control_step_orientation_converges():
    target = Pose(np.zeros(3), quat_from_rotvec([0.0, 0.0, 2.5]))
    state = ControlState(current=Pose.identity(), target=target)
    bound = convergence_tick_bound(0.0, 2.5, CFG)
    for _ in range(bound):
        state, _ = control_step(state, CFG)
    assert rotation_distance(state.current.orientation, target.orientation) < 1e-3


def test_safety_clamps_under_adversarial_jumps():
    rng = np.random.default_rng(999)
    state = ControlState.at_rest(Pose.identity())
    prev_speed = 0.0
    for tick in range(400):
        if tick % 17 == 0:
            state = ControlState(
                current=state.current,
                target=Pose(rng.normal(size=3) * 2.0, quat_from_rotvec(rng.normal(size=3))),
                velocity_estimate=state.velocity_estimate,
                kalman=state.kalman,
                last_command=state.last_command,
                tick=state.tick,
            )
        state, cmd = control_step(state, CFG)
        speed = float(np.linalg.norm(cmd.linear))
        assert speed <= CFG.v_max_trans + 1e-12
        assert abs(speed - prev_speed) <= CFG.a_trans * CFG.dt + 1e-9
        assert float(np.linalg.norm(cmd.angular)) <= CFG.w_max_rot + 1e-12
        prev_speed = speed


def test_smoothness_bound_on_profile():
    target = Pose(np.array([0.3, -0.2, 0.1]), quat_from_rotvec([0.2, 0.0, 0.4]))
    state = ControlState(current=Pose.identity(), target=target)
    prev_speed = 0.0
    for _ in range(300):
        state, cmd = control_step(state, CFG)
        speed = float(np.linalg.norm(cmd.linear))
        assert abs(speed - prev_speed) <= CFG.a_trans * CFG.dt + 1e-9
        prev_speed = speed


def test_velocity_estimate_tracks_commands():
    target = Pose(np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0, 0.0]))
    state = ControlState(current=Pose.identity(), target=target)
    for _ in range(100):  # still cruising: accel ends at tick 10, cruise runs ~115 ticks
        state, cmd = control_step(state, CFG)
    assert float(np.linalg.norm(cmd.linear)) == 0.2
    assert state.velocity_estimate[0] == pytest.approx(0.2, abs=1e-3)


def test_config_rejects_nonpositive_values():
    with pytest.raises(ValueError):
        ControllerConfig(v_max_trans=0.0)
    with pytest.raises(ValueError):
        KalmanConfig(process_var=-1.0)
