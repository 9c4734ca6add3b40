import json
from pathlib import Path

import numpy as np
import pytest

from mixreg.mixing import Gamma
from mixreg.model import RegressionData

FIXTURES = Path(__file__).with_name("fixtures")


@pytest.fixture(scope="session")
def oracle_reference():
    """Frozen grid-oracle posterior summaries for the n=6 toy (see fixtures/build_oracle.py)."""
    return json.loads((FIXTURES / "oracle_n6_t4.json").read_text())


@pytest.fixture(scope="session")
def toy_data(oracle_reference):
    d = oracle_reference["data"]
    return RegressionData(np.array(d["y"]), np.array(d["x"]), d["a"])


@pytest.fixture(scope="session")
def t4_mixing():
    return Gamma(2.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def multivariate_data():
    g = np.random.default_rng(3)
    n, p, d = 25, 2, 2
    X = np.c_[np.ones(n), g.normal(size=n)]
    y = X @ np.array([[1.0, 2.0], [0.5, -1.0]]) + g.standard_t(5, size=(n, d))
    return RegressionData(y, X, 1.0)


# -- acceptance reporting: one pass/fail line per criterion ----------------------------

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """``record_criterion(k, passed, detail)`` prints and stores the outcome line."""

    def record(number, passed, detail):
        line = f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} -- {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
