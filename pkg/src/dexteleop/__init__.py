"""Type-guided dexterous teleoperation engine.

Instead of retargeting human hand posture onto robot joints, the engine
selects a discrete manipulation type from an annotated library and drives
the robot hand by interpolating between the type's stretch and contract
postures, steered by human fingertip motion.  Around that core sit a hand
kinematics model with warm-started IK, a smoothed Cartesian velocity
controller for the arm, an admittance teach mode for authoring new types,
a simulated plant with demonstration recording, and an operator session
server.
"""

__version__ = "0.1.0"
