import pytest

_results = []


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(label): top-level acceptance criterion, reported one line "
        "per criterion at the end of the run",
    )


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    if report.when == "call":
        marker = item.get_closest_marker("acceptance")
        if marker:
            _results.append((marker.args[0], report.outcome))
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in _results:
        word = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{word}  {label}")
