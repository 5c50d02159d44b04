import numpy as np
import pytest

from dexteleop.assets import bundled_hand_model_path, bundled_library_path
from dexteleop.geometry import Pose
from dexteleop.hand import FingerChain, HandKinematicModel, Joint, load_hand_model
from dexteleop.library import load_library


@pytest.fixture(scope="session")
def hand_model():
    return load_hand_model(bundled_hand_model_path())


@pytest.fixture(scope="session")
def library(hand_model):
    return load_library(bundled_library_path(), hand_model)


def make_planar_model(l1=0.1, l2=0.05, limits=(-np.pi, np.pi)):
    """Single two-link chain rotating about z in the xy plane."""
    identity = np.array([1.0, 0.0, 0.0, 0.0])
    chain = FingerChain(
        name="f0",
        joints=(
            Joint(axis=(0, 0, 1), origin_offset=(0, 0, 0), origin_rotation=identity, limits=limits),
            Joint(axis=(0, 0, 1), origin_offset=(l1, 0, 0), origin_rotation=identity, limits=limits),
        ),
        fingertip_offset=(l2, 0, 0),
    )
    return HandKinematicModel("planar2", [chain])


@pytest.fixture
def planar_model():
    return make_planar_model()


def random_in_limit(model, rng, margin=0.0):
    span = model.upper - model.lower
    return model.lower + margin * span + rng.random(model.dof) * (1 - 2 * margin) * span


def assert_pose_close(a: Pose, b: Pose, pos_tol=1e-9, rot_tol=1e-9):
    assert a.almost_equal(b, pos_tol=pos_tol, rot_tol=rot_tol), (
        f"poses differ: {a.position} vs {b.position}"
    )
