import pytest

from rwre import models
from rwre.env import ModelSpec, StepLaw


@pytest.fixture
def desk():
    return models.desk()


@pytest.fixture
def two_jump():
    return models.two_jump()


@pytest.fixture
def point_mass():
    return models.point_mass()


def homogeneous(pairs, u_hat):
    return ModelSpec.homogeneous(StepLaw.from_pairs(pairs), u_hat)


_CRITERIA: list[str] = []


def record_criterion(line: str) -> None:
    _CRITERIA.append(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
