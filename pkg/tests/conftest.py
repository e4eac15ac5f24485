import pytest

from stochreo.stochastic import primitive
from support import make_lossyfifo1

_outcomes: dict[str, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(marker.args[0], []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_outcomes, key=lambda s: int(s.split()[0])):
        states = _outcomes[label]
        verdict = "PASS" if all(s == "passed" for s in states) else "FAIL"
        terminalreporter.write_line(f"criterion {label}: {verdict}")


@pytest.fixture
def lossysync():
    return primitive("lossysync", "ab", {"flow": 1.0, "loss": 1.0}, {"a": 1.0, "b": 1.0})


@pytest.fixture
def fifo1():
    return primitive("fifo1", "cd", {"in": 1.0, "out": 1.0}, {"c": 1.0, "d": 1.0})


@pytest.fixture
def lossyfifo1():
    return make_lossyfifo1()
