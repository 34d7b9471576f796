import pytest

_CRITERIA: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA[num] = ("PASS" if rep.passed else "FAIL", title, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, title, dur = _CRITERIA[num]
        terminalreporter.write_line(f"{status} criterion {num:>2}: {title} ({dur:.2f} s)")
