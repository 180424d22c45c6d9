import numpy as np
import pytest

from app.topology.field import ScalarField, synth_gaussian_mixture


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)


@pytest.fixture
def two_bump_field() -> ScalarField:
    return synth_gaussian_mixture((16, 16), [((4.0, 4.0), 1.0, 2.0), ((11.0, 11.0), 0.6, 2.0)])


@pytest.fixture
def ramp_field() -> ScalarField:
    return ScalarField(dims=(5,), values=np.array([0.0, 3.0, 1.0, 4.0, 2.0]))
