import sys

import pytest

from dcbsim.config import parse_scenario
from dcbsim.runner import run


def scenario(text: str = "", horizon_ms: float = 5, warmup_ms: float = 0.0):
    """Parse a scenario snippet with a short horizon appended."""
    return parse_scenario(f"{text}\n[sim]\nhorizon_ms = {horizon_ms}\nwarmup_ms = {warmup_ms}\n")


def run_text(text: str = "", horizon_ms: float = 5, warmup_ms: float = 0.0, flows=None):
    return run(scenario(text, horizon_ms, warmup_ms), flows=flows)


@pytest.fixture
def run_snippet():
    return run_text


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])
