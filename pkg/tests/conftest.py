import json
from pathlib import Path

import numpy as np
import pytest

from groupfact import _backend

ORACLE_DIR = Path(__file__).parent / "oracles"


@pytest.fixture(scope="session")
def frozen():
    with open(ORACLE_DIR / "frozen.json", encoding="utf-8") as fh:
        return json.load(fh)


AVAILABLE_BACKENDS = [b for b in _backend.BACKENDS if b == "numpy" or _backend.HAVE_NUMBA]


@pytest.fixture(params=AVAILABLE_BACKENDS)
def backend(request):
    with _backend.use(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import _acceptance_log

    if _acceptance_log.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_log.RESULTS:
            terminalreporter.write_line(line)
