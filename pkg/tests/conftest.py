import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mnist_dir():
    d = os.environ.get("MNIST_DIR")
    if not d or not os.path.exists(os.path.join(d, "t10k-labels-idx1-ubyte")) and not \
            os.path.exists(os.path.join(d, "t10k-labels-idx1-ubyte.gz")):
        pytest.skip("MNIST IDX files not available; set MNIST_DIR to run")
    return d


ACCEPTANCE_LINES = []


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.skipped and "test_acceptance" in report.nodeid and name.startswith("test_c"):
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else ""
        ACCEPTANCE_LINES.append(f"criterion {name[6]}: SKIP  {reason.replace('Skipped: ', '')}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
