import numpy as np
import pytest

from holderlab import build_model


@pytest.fixture(scope="session")
def heisenberg():
    return build_model("heisenberg")[0]


@pytest.fixture(scope="session")
def perturbed():
    return build_model("perturbed", 0.5)[0]


@pytest.fixture(scope="session")
def foliation():
    return build_model("foliation")[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", [])
    if results:
        terminalreporter.section("acceptance criteria")
        for res in sorted(results, key=lambda r: r.number):
            terminalreporter.write_line(res.line())
