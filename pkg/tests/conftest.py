import pytest

# criterion number -> (description, outcome, measured)
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by a test")


@pytest.fixture
def measured(request):
    """Record the measured value(s) of an acceptance criterion for the summary."""
    values = {}
    request.node.user_properties.append(("measured", values))
    return values


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    number, text = mark.args
    values = next((v for k, v in item.user_properties if k == "measured"), {})
    _CRITERIA[number] = (text, "PASS" if rep.passed else "FAIL", dict(values))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        text, status, values = _CRITERIA[number]
        shown = ", ".join(f"{k}={v}" for k, v in values.items())
        terminalreporter.write_line(f"criterion {number:>2} {status}: {text}" + (f" [{shown}]" if shown else ""))
