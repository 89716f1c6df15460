import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from conelab import lattice as lat

settings.register_profile(
    "conelab",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("conelab")


@pytest.fixture
def oracle_spec():
    return lat.GridSpec(n=3, L=4.0, N=8)


@pytest.fixture
def oracle_band():
    return lat.Band(xi_n=(0.5, 1.0), r_max=1.0)


@pytest.fixture
def spec16():
    return lat.GridSpec(n=3, L=4.0, N=16, offset=True)


@pytest.fixture
def band16():
    # xi' bounded away from 0 so every mode feels the cone-type square functions
    return lat.Band(xi_n=(0.6, 1.8), r_max=1.0, r_min=0.25)


def random_field(spec, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    return lat.SpatialField(spec, v)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
