import numpy as np
import pytest

from rfix.poly import Controller, IntervalPlant
from rfix.synth import PerformanceSpec, SynthesisSpec, check_controller, synthesize

from .reference import A_BOUNDS, B_BOUNDS, DC, REF_X, REF_Y


@pytest.fixture(scope="session")
def plant():
    return IntervalPlant.from_bounds(A_BOUNDS, B_BOUNDS)


@pytest.fixture(scope="session")
def ref_ctrl():
    return Controller(REF_X, REF_Y)


@pytest.fixture(scope="session")
def destab_ctrl():
    return Controller(REF_X, -100.0 * np.array(REF_Y))


@pytest.fixture(scope="session")
def example_spec(plant):
    return SynthesisSpec(
        plant, 2, DC,
        sensitivity=PerformanceSpec.from_db(-3.0, (0.01, 0.1)),
        comp_sensitivity=PerformanceSpec.from_db(-3.0, (50.0, 100.0)),
        pins={"x2": 0.0},
    )


@pytest.fixture(scope="session")
def synth_result(example_spec):
    return synthesize(example_spec)


@pytest.fixture(scope="session")
def ref_check(example_spec, ref_ctrl):
    return check_controller(example_spec, ref_ctrl)
