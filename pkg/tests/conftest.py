import functools

import numpy as np
import pytest
from hypothesis import settings

from lfdepth import synth

settings.register_profile("default", deadline=None, derandomize=True)
settings.load_profile("default")

# acceptance lines collected by test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@functools.lru_cache(maxsize=None)
def rendered(name):
    scenes = {
        "half0": lambda: synth.half_plane_scene(32, 32, 9, d_occ=1.0),
        "half90": lambda: synth.half_plane_scene(32, 32, 9, d_occ=1.0, angle_deg=90),
        "half2": lambda: synth.half_plane_scene(48, 48, 9, d_occ=2.0),
        "wedge": lambda: synth.wedge_scene(48, 48, 9, d_occ=1.0),
        "wedge2": lambda: synth.wedge_scene(64, 64, 9, d_occ=2.0),
        "contrast": lambda: synth.high_contrast_wedge(48, 48, 9, d_occ=2.0),
        "plane": lambda: synth.SceneSpec(32, 32, 9, 1.0, synth.BG_TEXTURE),
    }
    return synth.render(scenes[name]())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
