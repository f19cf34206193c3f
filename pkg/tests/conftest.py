from importlib import resources

import numpy as np
import pytest

from ldm import matrix as mx
from ldm.parser import parse

S3 = np.sqrt(3) / 4
# the skewed qubit used by the coin experiment and the operator-sum example
RHO_MAT = np.array([[3 / 4, S3], [S3, 1 / 4]], dtype=complex)
RHO_MINUS_MAT = np.array([[3 / 4, -S3], [-S3, 1 / 4]], dtype=complex)


def fixture_source(name: str) -> str:
    return resources.files("ldm").joinpath("fixtures", f"{name}.ldm").read_text()


def fixture_path(name: str) -> str:
    return str(resources.files("ldm").joinpath("fixtures", f"{name}.ldm"))


def load_fixture(name: str):
    return parse(fixture_source(name))


@pytest.fixture
def rho():
    return mx.validate_density(RHO_MAT)


@pytest.fixture(autouse=True)
def _restore_tolerance():
    before = mx.get_tolerance()
    yield
    mx.set_tolerance(before)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
