import os
from pathlib import Path

import numpy as np
import pytest

from mlsom.data import load_dataset
from mlsom.errors import DataError

ROOT = Path(__file__).resolve().parents[1]


def data_dir():
    return Path(os.environ.get("MLSOM_DATA_DIR", ROOT / "data"))


@pytest.fixture(scope="session")
def mnist():
    """(train, test) MNIST sets, skipping the test when the files are absent."""
    try:
        return load_dataset("mnist", data_dir(), "train"), load_dataset("mnist", data_dir(), "test")
    except DataError as exc:
        pytest.skip(f"MNIST not available: {exc}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report one line each at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0].rstrip("."))):
            terminalreporter.write_line(line)
