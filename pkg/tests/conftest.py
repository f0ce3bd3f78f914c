import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[0])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def bins_and_puddle_spec():
    """Camera looking down at a large puddle flanked by an empty and a full bin."""
    import math

    from sentinel.coverage import CameraPose
    from sentinel.synth import SceneItem, SceneSpec

    res = (640, 400)
    vfov = 2 * math.atan(math.tan(math.radians(35)) * res[1] / res[0])
    cam = CameraPose((0.0, 3.0, 0.0), 0.0, -0.75, math.radians(70), vfov)
    items = [
        SceneItem("puddle", 4.2, 0.3, {"rx": 1.1, "rz": 0.7}),
        SceneItem("bin", 4.0, -1.8, {"radius": 0.3, "height": 0.8, "full": False, "id": "bin_a", "seed": 1}),
        SceneItem("bin", 4.0, 1.8, {"radius": 0.3, "height": 0.8, "full": True, "id": "bin_b", "seed": 2}),
    ]
    return SceneSpec(cam, res, items)


@pytest.fixture(scope="session")
def bins_scene_dir(tmp_path_factory):
    from sentinel.synth import synthesize

    out = tmp_path_factory.mktemp("bins_scene")
    synthesize(bins_and_puddle_spec(), 4, 0, out)
    return out


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory):
    from sentinel.synth import demo_scene, synthesize

    out = tmp_path_factory.mktemp("demo")
    synthesize(demo_scene(), 3, 0, out)
    return out
