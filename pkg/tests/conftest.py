import numpy as np
import pytest

from levy_spine import ExpComponent, ProcessSpec, Stable, build_rogers


def brownian(b=0.0):
    return ProcessSpec.from_path_drift(0.5, b, [])


def risk():
    return ProcessSpec.from_path_drift(0.0, -1.0, [ExpComponent("positive", 1.0, 1.0)])


def bm_exp():
    return ProcessSpec.from_path_drift(0.5, -1.0, [ExpComponent("positive", 1.0, 1.0)])


def two_sided():
    return ProcessSpec.from_path_drift(
        0.3, 0.4, [ExpComponent("positive", 2.0, 3.0), ExpComponent("negative", 0.5, 0.7)]
    )


def stable(alpha, theta, k=1.0):
    return ProcessSpec(closed_form=Stable(alpha, k, theta))


SPECS = {
    "bm": brownian(),
    "bm_drift": brownian(0.5),
    "risk": risk(),
    "bm_exp": bm_exp(),
    "two_sided": two_sided(),
    "stable_1.2": stable(1.2, 0.3),
    "stable_1.8": stable(1.8, 0.05),
}


@pytest.fixture(params=sorted(SPECS))
def spec_name(request):
    return request.param


@pytest.fixture
def rogers(spec_name):
    return build_rogers(SPECS[spec_name])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
