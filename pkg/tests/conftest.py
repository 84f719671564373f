import numpy as np
import pytest

from randomlab.dataset import ExperimentData


@pytest.fixture
def small_data():
    rng = np.random.default_rng(0)
    n = 40
    X = rng.normal(size=(n, 2))
    z = np.tile([0, 1], n // 2)
    y = X[:, 0] + 2.0 * z + rng.normal(0, 0.5, n)
    return ExperimentData(y, z, X, covariate_names=("x1", "x2"))


_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rpartition("::")[2]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        _criteria[name] = (report.outcome, dict(report.user_properties))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda s: int(s.split("_")[2])):
        outcome, props = _criteria[name]
        label = "PASS" if outcome == "passed" else "FAIL"
        detail = "; ".join(f"{k}={v}" for k, v in props.items())
        terminalreporter.write_line(f"{label} {name.removeprefix('test_')} {detail}")
