import numpy as np
import pytest

from nof1rl.core import ActionSet, default_action_set


@pytest.fixture
def actions():
    return default_action_set()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def identical_actions(k):
    return ActionSet.from_records(
        [{"label": f"walk {i}", "type_id": 0, "intensity": 0.4, "duration_min": 20}
         for i in range(k)])


GATE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if GATE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(GATE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
