import json
import sys

import pytest

from kgrep import load_fixture, load_validate
from kgrep.measures import load_measure


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def graph(name):
    return load_validate(load_fixture(name))


@pytest.fixture(scope="session")
def g1():
    return graph("g1")


@pytest.fixture(scope="session")
def g2():
    return graph("g2")


@pytest.fixture(scope="session")
def g3():
    return graph("g3")


@pytest.fixture(scope="session")
def g4():
    return graph("g4")


@pytest.fixture(scope="session")
def mu13(g2):
    return load_measure(g2, load_fixture("g2_markov_1_3"))


@pytest.fixture(scope="session")
def mu14(g2):
    return load_measure(g2, load_fixture("g2_markov_1_4"))


@pytest.fixture(scope="session")
def mu34(g2):
    return load_measure(g2, load_fixture("g2_markov_3_4"))


@pytest.fixture
def g2_spec():
    return json.loads(json.dumps(load_fixture("g2")))
