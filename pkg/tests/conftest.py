from pathlib import Path

import pytest

from busched.io import load_instance

DATA = Path(__file__).parent / "data"


@pytest.fixture
def learning_instance():
    return load_instance(DATA / "learning_2line.json")


@pytest.fixture
def peak_instance():
    return load_instance(DATA / "peak_offpeak.json")



def pytest_terminal_summary(terminalreporter):
    import acclog

    if acclog.LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(acclog.LINES):
            terminalreporter.write_line(acclog.LINES[n])
