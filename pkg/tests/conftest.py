import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ORACLES = Path(__file__).with_name("oracles") / "frozen.json"
DATA = Path(__file__).parents[1] / "src" / "pidecision" / "data"


@pytest.fixture(scope="session")
def frozen():
    return json.loads(ORACLES.read_text())


@pytest.fixture(scope="session")
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
