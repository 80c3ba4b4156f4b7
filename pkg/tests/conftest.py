import numpy as np
import pytest

from driver_attention.headpose import FRONTAL, CameraIntrinsics, FaceTemplate, rotation_from_ypr

CAMERA = CameraIntrinsics(fx=1000.0, fy=1000.0, cx=640.0, cy=480.0)


def project_template(yaw, pitch=0.0, roll=0.0, t=(0.0, 0.0, 0.55), K=CAMERA, template=None):
    """Forward pinhole projection of the face template: the pose oracle."""
    template = template or FaceTemplate()
    R = rotation_from_ypr(yaw, pitch, roll) @ FRONTAL
    return K.project(template.points_3d() @ R.T + np.asarray(t, dtype=float))


@pytest.fixture
def camera():
    return CAMERA


@pytest.fixture
def template():
    return FaceTemplate()


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Store one acceptance result; the terminal summary prints them in order."""
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
