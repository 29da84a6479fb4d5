import math

import numpy as np
import pytest

from flowcent.constants import calibrate, calibrate_local_constants
from flowcent.engine import (DisjointUnionFlow, SuspensionFlow, TorusTranslationAction,
                             TorusTranslationFlow)

CAT = [[2, 1], [1, 1]]
SQRT2M1 = math.sqrt(2) - 1


@pytest.fixture(scope="session")
def cat():
    return SuspensionFlow(CAT, 1.0)


@pytest.fixture(scope="session")
def cat_constants(cat):
    return calibrate(cat, seed=0)


@pytest.fixture(scope="session")
def circle():
    return TorusTranslationFlow([1.0])


@pytest.fixture(scope="session")
def circle_constants(circle):
    return calibrate_local_constants(circle, 0.25, 0.225, epsilon0=1.0)


@pytest.fixture(scope="session")
def irrational():
    return TorusTranslationFlow([1.0, SQRT2M1])


@pytest.fixture(scope="session")
def irrational_constants(irrational):
    return calibrate(irrational, seed=0)


@pytest.fixture(scope="session")
def union():
    return DisjointUnionFlow([SuspensionFlow(CAT), SuspensionFlow(CAT)])


@pytest.fixture(scope="session")
def union_constants(union):
    return calibrate(union, seed=0)


@pytest.fixture(scope="session")
def t3():
    return TorusTranslationAction(np.array([[1, 0], [0, SQRT2M1], [0, 1]]))


from hypothesis import settings

settings.register_profile("flowcent", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("flowcent")


ACCEPTANCE_LINES = {}


def record_criterion(number: int, passed: bool, detail: str):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
