import numpy as np
import pytest

from contactwave.core import EndStates, GasModel
from contactwave.profile import solve_profile, verify_gaussian_bounds


@pytest.fixture(scope="session")
def gas():
    return GasModel()


@pytest.fixture(scope="session")
def ends(gas):
    return EndStates.matched(gas, 1.0, 1.1)


@pytest.fixture(scope="session")
def profile(gas, ends):
    p = solve_profile(gas, ends)
    c1, c2, _ = verify_gaussian_bounds(p)
    return p.with_gauss(c1, c2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria report: one PASS/FAIL line per criterion at the end of the run
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def acceptance():
    def record(num: int, passed: bool, detail: str) -> bool:
        line = f"CRITERION {num:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE[num] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[num])
