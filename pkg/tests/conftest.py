import pytest

from twinforge.toy import toy_library, toy_pools


@pytest.fixture(scope="session")
def lib():
    return toy_library()


@pytest.fixture(scope="session")
def pools():
    return toy_pools()


@pytest.fixture(scope="session")
def aloha(lib):
    return lib.embodiments["aloha"]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    number, title = mark.args
    seen = item.config._criteria
    failed = report.failed or number in seen and not seen[number][1]
    if report.when == "call" or report.failed:
        seen[number] = (title, not failed)


def pytest_terminal_summary(terminalreporter, config):
    seen = getattr(config, "_criteria", {})
    if not seen:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(seen):
        title, ok = seen[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title}")
