import pytest

_RESULTS: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, name): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.outcome == "passed"):
        return
    n, name = mark.args
    _, prev, secs = _RESULTS.get(n, (name, "passed", 0.0))
    outcome = rep.outcome if prev == "passed" else prev
    _RESULTS[n] = (name, outcome, secs + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        name, outcome, secs = _RESULTS[n]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2}  {status}  {name}  ({secs:.1f}s)")
