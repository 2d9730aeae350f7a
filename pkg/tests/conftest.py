import pytest

# number -> (title, passed, measured)
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when == "teardown":
        return
    if report.when == "setup" and report.passed:
        return
    number, title = marker.args
    measured = "; ".join(str(v) for k, v in item.user_properties if k == "measured")
    ACCEPTANCE[number] = (title, report.passed, measured)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, measured = ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {number}. {title}"
        if measured:
            line += f" | {measured}"
        terminalreporter.write_line(line)
