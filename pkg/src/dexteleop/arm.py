"""Cartesian velocity control for the simulated arm.

Translation follows a trapezoidal speed profile: accelerate at ``a_trans``
up to ``v_max_trans`` (20 cm/s by default), cruise, then ride a braking
curve that lands exactly on the target; short moves become triangular.
Rotation speed is proportional to the orientation error with a hard upper
bound.  A per-axis scalar Kalman filter (random-walk model) smooths the
measured velocity estimate carried in the state.  A final safety stage
clamps every emitted command to the speed cap and the per-tick
acceleration bound, whatever the target does between ticks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Pose, quat_conjugate, quat_from_rotvec, quat_multiply, rotvec_from_quat

_TINY = 1e-12


@dataclass(frozen=True)
class KalmanConfig:
    process_var: float = 1e-4
    measurement_var: float = 1e-2

    def __post_init__(self):
        if self.process_var <= 0 or self.measurement_var <= 0:
            raise ValueError("Kalman variances must be positive")


@dataclass(frozen=True)
class ControllerConfig:
    v_max_trans: float = 0.2  # m/s
    a_trans: float = 0.5  # m/s^2
    k_rot: float = 1.0  # 1/s
    w_max_rot: float = 0.5  # rad/s
    loop_hz: float = 25.0
    kalman: KalmanConfig = field(default_factory=KalmanConfig)
    measurement_noise_std: float = 0.0  # optional plant-noise flag for filter tests

    def __post_init__(self):
        for name in ("v_max_trans", "a_trans", "k_rot", "w_max_rot", "loop_hz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def dt(self) -> float:
        return 1.0 / self.loop_hz


@dataclass(frozen=True)
class KalmanState:
    """Per-axis scalar estimates and covariances (6 axes)."""

    estimate: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "estimate", np.asarray(self.estimate, dtype=float).reshape(-1))
        cov = np.asarray(self.covariance, dtype=float).reshape(-1)
        if np.any(cov <= 0):
            raise ValueError("Kalman covariance must stay positive")
        object.__setattr__(self, "covariance", cov)

    @staticmethod
    def initial(axes: int = 6, prior_var: float = 1.0) -> "KalmanState":
        return KalmanState(np.zeros(axes), np.full(axes, prior_var))


@dataclass(frozen=True)
class VelocityCommand:
    linear: np.ndarray  # m/s
    angular: np.ndarray  # rad/s
    tick: int

    def __post_init__(self):
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float).reshape(3))
        object.__setattr__(self, "angular", np.asarray(self.angular, dtype=float).reshape(3))


@dataclass(frozen=True)
class ControlState:
    current: Pose
    target: Pose
    velocity_estimate: np.ndarray = field(default_factory=lambda: np.zeros(6))
    kalman: KalmanState = field(default_factory=KalmanState.initial)
    last_command: np.ndarray = field(default_factory=lambda: np.zeros(6))
    tick: int = 0

    def __post_init__(self):
        object.__setattr__(self, "velocity_estimate", np.asarray(self.velocity_estimate, dtype=float).reshape(6))
        object.__setattr__(self, "last_command", np.asarray(self.last_command, dtype=float).reshape(6))

    @staticmethod
    def at_rest(pose: Pose) -> "ControlState":
        return ControlState(current=pose, target=pose)


def braking_speed(distance: float, accel: float, dt: float) -> float:
    """Largest speed from which decelerating by ``accel*dt`` per tick still
    stops within ``distance`` (discrete-time stopping-distance bound)."""
    if distance <= 0.0:
        return 0.0
    half = 0.5 * accel * dt
    return float(-half + np.sqrt(half * half + 2.0 * accel * distance))


def plan_translation(state: ControlState, config: ControllerConfig) -> np.ndarray:
    """Trapezoidal-profile velocity toward the target position."""
    error = state.target.position - state.current.position
    distance = float(np.linalg.norm(error))
    if distance < _TINY:
        return np.zeros(3)
    dt = config.dt
    prev_speed = float(np.linalg.norm(state.last_command[:3]))
    speed = min(
        prev_speed + config.a_trans * dt,
        config.v_max_trans,
        braking_speed(distance, config.a_trans, dt),
        distance / dt,  # land exactly, never step past the target
    )
    return error * (speed / distance)


def plan_rotation(state: ControlState, config: ControllerConfig) -> np.ndarray:
    """Error-proportional angular velocity with a hard safety bound."""
    rot_error = rotvec_from_quat(
        quat_multiply(state.target.orientation, quat_conjugate(state.current.orientation))
    )
    err = float(np.linalg.norm(rot_error))
    if err < _TINY:
        return np.zeros(3)
    speed = min(config.k_rot * err, config.w_max_rot)
    return rot_error * (speed / err)


def kalman_smooth(state: KalmanState, raw_velocity: np.ndarray, config: KalmanConfig) -> tuple[KalmanState, np.ndarray]:
    """One predict/update of the per-axis random-walk filter."""
    z = np.asarray(raw_velocity, dtype=float).reshape(-1)
    p_prior = state.covariance + config.process_var
    gain = p_prior / (p_prior + config.measurement_var)
    estimate = state.estimate + gain * (z - state.estimate)
    covariance = (1.0 - gain) * p_prior
    return KalmanState(estimate, covariance), estimate


def _apply_safety(lin: np.ndarray, ang: np.ndarray, state: ControlState, config: ControllerConfig):
    """Clamp to speed caps and the per-tick acceleration bound."""
    dt = config.dt
    prev_speed = float(np.linalg.norm(state.last_command[:3]))
    speed = float(np.linalg.norm(lin))
    lo = max(0.0, prev_speed - config.a_trans * dt)
    hi = min(config.v_max_trans, prev_speed + config.a_trans * dt)
    if speed > _TINY:
        lin = lin * (min(max(speed, lo), hi) / speed)
    elif lo > 0.0:
        # Target vanished under us; bleed off speed along the old direction.
        old = state.last_command[:3]
        lin = old * (lo / max(float(np.linalg.norm(old)), _TINY))
    w = float(np.linalg.norm(ang))
    if w > config.w_max_rot:
        ang = ang * (config.w_max_rot / w)
    return lin, ang


def control_step(
    state: ControlState, config: ControllerConfig, rng: np.random.Generator | None = None
) -> tuple[ControlState, VelocityCommand]:
    """One fixed-frequency tick: smooth, plan, clamp, integrate, emit.

    Emits exactly one command per call; the simulated arm pose integrates
    the command over one loop period.
    """
    dt = config.dt
    # The measured velocity over the last tick equals the last command in
    # the exact-integration plant; the noise flag exercises the filter.
    raw = state.last_command.copy()
    if config.measurement_noise_std > 0.0 and rng is not None:
        raw = raw + rng.normal(0.0, config.measurement_noise_std, size=6)
    kalman, estimate = kalman_smooth(state.kalman, raw, config.kalman)

    lin = plan_translation(state, config)
    ang = plan_rotation(state, config)
    lin, ang = _apply_safety(lin, ang, state, config)

    new_pose = Pose(
        state.current.position + lin * dt,
        quat_multiply(quat_from_rotvec(ang * dt), state.current.orientation),
    )
    command = VelocityCommand(linear=lin, angular=ang, tick=state.tick)
    new_state = replace(
        state,
        current=new_pose,
        velocity_estimate=estimate,
        kalman=kalman,
        last_command=np.concatenate([lin, ang]),
        tick=state.tick + 1,
    )
    return new_state, command


def convergence_tick_bound(distance: float, angle: float, config: ControllerConfig) -> int:
    """Worst-case tick count for a fixed target, derived from the profile."""
    dt = config.dt
    trans_time = 2.0 * config.v_max_trans / config.a_trans + distance / config.v_max_trans
    # Clamped rotation burns error at w_max; the proportional tail decays
    # geometrically per tick down to the 1e-3 convergence threshold.
    rot_time = angle / config.w_max_rot
    tail_ticks = np.log(1e-3 / max(angle, 1e-3)) / np.log(max(1.0 - config.k_rot * dt, 1e-6))
    return int(np.ceil(trans_time / dt + rot_time / dt + abs(tail_ticks))) + 25
