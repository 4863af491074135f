import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = {}


def _marker(item):
    mark = item.get_closest_marker("acceptance")
    return None if mark is None else (mark.kwargs["number"], mark.kwargs["title"])


@pytest.fixture
def criterion(request):
    """Record and assert one acceptance criterion: ``criterion(ok, detail)``."""
    number, title = _marker(request.node)
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def report(ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
        lines[number] = line
        print(line)
        assert ok, line

    return report


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    info = _marker(item)
    if info is None or rep.when != "call" or not rep.failed:
        return
    lines = item.config.stash[_ACCEPTANCE_KEY]
    number, title = info
    if number not in lines:
        message = str(call.excinfo.value).splitlines()[0] if call.excinfo else "error"
        lines[number] = f"[FAIL] criterion {number:2d} {title}: raised {call.excinfo.typename}: {message}"


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
