import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from obesity_heuristic.controller import Controller  # noqa: E402

ACCEPTANCE_LINES = []
CYCLE_CHECKS = {"cycles": 0, "invocations": 0}


@pytest.fixture(autouse=True)
def enforce_conservation(monkeypatch):
    """Every controller cycle in the suite must conserve units and never grow the backlog."""
    original = Controller.cycle

    def checked(self, batch):
        seen = len(self.invocations)
        original(self, batch)
        entry = self.cycles[-1]
        for key in ("tally", "tally_after_response"):
            if key in entry:
                assert entry[key]["total"] == entry["units_total"] == len(self.units)
        for inv in self.invocations[seen:]:
            assert inv["omega6_after"] <= inv["omega6_before"]
        CYCLE_CHECKS["cycles"] += 1
        CYCLE_CHECKS["invocations"] += len(self.invocations) - seen

    monkeypatch.setattr(Controller, "cycle", checked)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
