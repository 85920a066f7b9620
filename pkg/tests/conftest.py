import numpy as np
import pytest

from zalms.experiment import DEFAULT_W_STAR
from zalms.filtering import AlgoParams
from zalms.signals import InputModel, PlantSpec


@pytest.fixture
def default_plant():
    return PlantSpec(np.array(DEFAULT_W_STAR), 0.01)


@pytest.fixture
def ar_input():
    return InputModel(0.6, 0.64)


@pytest.fixture
def iid_input():
    return InputModel(0.6, 0.64, regressor="independent")


@pytest.fixture
def small_plant():
    return PlantSpec(np.array([0.8, 0.0, -0.3, 0.0, 0.1]), 0.01)


@pytest.fixture
def za_params():
    return AlgoParams(0.01, 0.01)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
