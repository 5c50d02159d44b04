"""Kinesthetic teach mode over simulated hand motors.

External force on each joint is estimated from motor current magnitude and
the deviation between commanded and measured position, low-pass filtered,
then rendered through virtual mass-damper-spring dynamics
(M*x'' + B*x' + K*x = F_ext) so pushing on a joint moves it compliantly.
Marked frames of the resulting trajectory become a new manipulation type.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EngineError
from .hand import HandKinematicModel
from .library import Library, ManipulationType, TaxonomyPath, TypeAttributes, add_type


class TeachError(EngineError):
    """Teach-mode protocol misuse (no recording, unmarked frames, ...)."""


@dataclass(frozen=True)
class AdmittanceParams:
    virtual_mass: float = 0.5  # M
    damping: float = 4.0  # B
    stiffness: float = 30.0  # K
    dt: float = 0.04

    def __post_init__(self):
        if self.virtual_mass <= 0 or self.stiffness <= 0 or self.dt <= 0 or self.damping < 0:
            raise ValueError("admittance parameters must satisfy M > 0, B >= 0, K > 0, dt > 0")


@dataclass(frozen=True)
class ForceGains:
    k_current: float = 2.0
    k_deviation: float = 10.0

    def __post_init__(self):
        if self.k_current < 0 or self.k_deviation < 0:
            raise ValueError("force gains must be non-negative")


@dataclass(frozen=True)
class TeachState:
    x: np.ndarray
    x_dot: np.ndarray
    f_ext: np.ndarray

    def __post_init__(self):
        for name in ("x", "x_dot", "f_ext"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"teach state field {name} must be finite")
            object.__setattr__(self, name, arr)

    @staticmethod
    def at_rest(dof: int) -> "TeachState":
        return TeachState(np.zeros(dof), np.zeros(dof), np.zeros(dof))


@dataclass(frozen=True)
class MotorReading:
    current_magnitude: np.ndarray  # amps, >= 0 per joint
    q_commanded: np.ndarray
    q_measured: np.ndarray
    q_dot_measured: np.ndarray

    def __post_init__(self):
        for name in ("current_magnitude", "q_commanded", "q_measured", "q_dot_measured"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"motor reading field {name} must be finite")
            object.__setattr__(self, name, arr)


def estimate_external_force(reading: MotorReading, gains: ForceGains) -> np.ndarray:
    """Per-joint force estimate, sign-aligned with the positional deviation."""
    deviation = reading.q_measured - reading.q_commanded
    return gains.k_current * reading.current_magnitude * np.sign(deviation) + gains.k_deviation * deviation


def admittance_step(state: TeachState, params: AdmittanceParams, f_ext: np.ndarray) -> TeachState:
    """Semi-implicit Euler step of M*x'' + B*x' + K*x = f_ext."""
    f_ext = np.asarray(f_ext, dtype=float).reshape(-1)
    x_ddot = (f_ext - params.damping * state.x_dot - params.stiffness * state.x) / params.virtual_mass
    x_dot = state.x_dot + x_ddot * params.dt
    x = state.x + x_dot * params.dt
    return TeachState(x=x, x_dot=x_dot, f_ext=f_ext)


@dataclass
class TeachSession:
    """Per-recording loop state: admittance, force filter, trajectory buffer.

    Runs at the control-loop cadence; `step` returns the compliant posture
    for the tick.  force_alpha is the new-sample weight of the first-order
    low-pass that smooths the force estimate (inertia for smoothness).
    """

    model: HandKinematicModel
    base_posture: np.ndarray
    params: AdmittanceParams = field(default_factory=AdmittanceParams)
    gains: ForceGains = field(default_factory=ForceGains)
    force_alpha: float = 0.2

    def __post_init__(self):
        self.base_posture = self.model.clamp(self.base_posture)
        self.state = TeachState.at_rest(self.model.dof)
        self.filtered_force = np.zeros(self.model.dof)
        self.trajectory: list[np.ndarray] = []
        self.stretch_index: int | None = None
        self.contract_index: int | None = None

    def current_posture(self) -> np.ndarray:
        return self.model.clamp(self.base_posture + self.state.x)

    def step_force(self, f_ext) -> np.ndarray:
        f_ext = np.zeros(self.model.dof) + np.asarray(f_ext, dtype=float)
        self.filtered_force = (1.0 - self.force_alpha) * self.filtered_force + self.force_alpha * f_ext
        self.state = admittance_step(self.state, self.params, self.filtered_force)
        posture = self.current_posture()
        self.trajectory.append(posture)
        return posture

    def step(self, reading: MotorReading) -> np.ndarray:
        return self.step_force(estimate_external_force(reading, self.gains))

    def mark_stretch(self) -> int:
        if not self.trajectory:
            raise TeachError("cannot mark stretch before any teach frame was recorded")
        self.stretch_index = len(self.trajectory) - 1
        return self.stretch_index

    def mark_contract(self) -> int:
        if not self.trajectory:
            raise TeachError("cannot mark contract before any teach frame was recorded")
        self.contract_index = len(self.trajectory) - 1
        return self.contract_index


def record_type(
    trajectory,
    stretch_index: int | None,
    contract_index: int | None,
    type_id: str,
    name: str,
    category: TaxonomyPath,
    attributes: TypeAttributes,
    library: Library,
    hand_model: HandKinematicModel,
    handedness: str = "either",
) -> Library:
    """Freeze two marked trajectory frames into a new library entry.

    Returns a new Library; the input library is never mutated.  Validation
    matches load-time validation (limits, DOF, duplicate ids).
    """
    trajectory = [np.asarray(frame, dtype=float) for frame in trajectory]
    if not trajectory:
        raise TeachError("teach trajectory is empty")
    if stretch_index is None or contract_index is None:
        raise TeachError("both stretch and contract frames must be marked before saving")
    try:
        stretch = trajectory[stretch_index]
        contract = trajectory[contract_index]
    except IndexError:
        raise TeachError(
            f"marked frames {stretch_index}/{contract_index} outside trajectory "
            f"of {len(trajectory)} frames"
        ) from None
    new_type = ManipulationType(
        id=type_id,
        name=name,
        category=category,
        stretch_posture=tuple(float(v) for v in stretch),
        contract_posture=tuple(float(v) for v in contract),
        attributes=attributes,
        handedness=handedness,
    )
    return add_type(library, new_type, hand_model)
