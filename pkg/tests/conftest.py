import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlmaxwell.field_core import GridSpec, VectorField
from nlmaxwell.material import NonlinearityModel, WeightSpec

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid8():
    return GridSpec(8, 2.0 * np.pi)


@pytest.fixture
def pure4():
    return NonlinearityModel("pure_power", 4.0, WeightSpec(2.0))


class UnitGammaModel(NonlinearityModel):
    """Model with ``Gamma = 1`` on every grid node, for closed-form oracles."""

    def gamma_on(self, grid):
        return np.ones(grid.shape)


@pytest.fixture
def flat4():
    return UnitGammaModel("pure_power", 4.0, WeightSpec(2.0))


def random_field(grid, rng, scale=1.0):
    return VectorField(grid, scale * rng.standard_normal((3,) + grid.shape))


# criterion number -> "PASS ..." / "FAIL ..." line, filled by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
