import math

import numpy as np
import pytest

from towerkernel.groups import GroupSpec, TowerSpec
from towerkernel.hyperbolic import DISC, HALFPLANE, MoebiusMap

_ACCEPTANCE: dict[str, str] = {}


def cyclic_group(lam: float) -> GroupSpec:
    """<w -> lam w> on the upper half-plane."""
    s = math.sqrt(lam)
    return GroupSpec(HALFPLANE, [MoebiusMap(s, 0, 0, 1 / s, HALFPLANE)])


def schottky_group() -> GroupSpec:
    r = math.sqrt(3.0)
    A = MoebiusMap(2, r, r, 2, DISC)
    B = MoebiusMap(2, 1j * r, -1j * r, 2, DISC)
    return GroupSpec(DISC, [A, B])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def cyc9():
    return cyclic_group(9.0)


@pytest.fixture(scope="session")
def cyc_annulus():
    return cyclic_group(math.exp(2 * math.pi))


@pytest.fixture(scope="session")
def schottky():
    return schottky_group()


@pytest.fixture(scope="session")
def cyc_tower():
    return TowerSpec("cyclic_powers", (2, 4, 8, 16, 32, 64), "trivial", rank=1)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{_ACCEPTANCE[name]}  {name}")
