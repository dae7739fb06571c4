import json
import math

import numpy as np
import pytest

from ncbf.array import ArrayConfig, UserLocation
from ncbf.dataset import is_admissible
from ncbf.lcmv import NcbfScenario
from ncbf.partition import PartitionSpec, build_grid

REF_ARRAY = ArrayConfig(24, 0.04, 3.5e9)
REF_SPEC = PartitionSpec(0.5, 6.0, math.radians(-40), math.radians(40))

# 8 elements over [-20, 20] deg x [1, 3] m: three angular columns, no rings
SMALL_ARRAY = ArrayConfig(8, 0.04, 3.5e9)
SMALL_SPEC = PartitionSpec(1.0, 3.0, math.radians(-20), math.radians(20))

SMALL_RUN = {
    "array": {"num_elements": 8},
    "coverage": {"r_min": 1.0, "r_max": 3.0, "psi_min_deg": -20, "psi_max_deg": 20},
    "num_users": 2,
    "dataset": {"size": 40, "split": 0.75, "seed": 3},
    "training": {"dims": [16, 8], "epochs": 2, "batch_size": 16, "seed": 5},
}


@pytest.fixture
def ref_array():
    return REF_ARRAY


@pytest.fixture
def ref_spec():
    return REF_SPEC


@pytest.fixture(scope="session")
def ref_grid():
    return build_grid(REF_SPEC, REF_ARRAY)


@pytest.fixture
def small_array():
    return SMALL_ARRAY


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(SMALL_SPEC, SMALL_ARRAY)


@pytest.fixture
def scenario_1():
    return NcbfScenario(
        UserLocation.from_degrees(-32, 3.4),
        (UserLocation.from_degrees(-10, 3.7), UserLocation.from_degrees(-40, 4.6)),
    )


@pytest.fixture
def scenario_2():
    return NcbfScenario(
        UserLocation.from_degrees(-10, 4.75),
        (UserLocation.from_degrees(38, 3.65), UserLocation.from_degrees(38, 5.8)),
    )


@pytest.fixture
def small_run_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(SMALL_RUN))
    return path


def random_scenario(config, num_users, rng, psi_deg=60.0, r_range=(0.5, 6.0)):
    """Well-separated users anywhere in front of the array."""
    placed = []
    while len(placed) < num_users:
        loc = UserLocation.from_degrees(
            rng.uniform(-psi_deg, psi_deg), rng.uniform(*r_range)
        )
        if is_admissible(config, loc, placed):
            placed.append(loc)
    return NcbfScenario(placed[0], tuple(placed[1:]))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
