import sys
from pathlib import Path

import pytest
from hypothesis import settings

from brepnet.data import generate_synthetic

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture
def cube():
    return generate_synthetic("box", {"width": 1.0, "depth": 1.0, "height": 1.0}, seed=0)


@pytest.fixture
def prism():
    return generate_synthetic("n_prism", {"n": 3}, seed=0)


@pytest.fixture
def holed_box():
    return generate_synthetic("box_with_hole", {"hole_sides": 4, "round_hole": False}, seed=0)


@pytest.fixture
def eight_faces():
    return generate_synthetic("n_prism", {"n": 6}, seed=1)
