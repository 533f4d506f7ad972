import os
from pathlib import Path

import pytest

DEFAULT_MNIST_DIR = Path("/root/data/mnist")

_verdicts = []


@pytest.fixture(scope="session")
def verdicts():
    return _verdicts


@pytest.fixture(scope="session")
def mnist_dir():
    d = os.environ.get("COCOACL_MNIST_DIR") or (str(DEFAULT_MNIST_DIR) if DEFAULT_MNIST_DIR.is_dir() else None)
    return d


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_verdicts):
            terminalreporter.write_line(line[1])
