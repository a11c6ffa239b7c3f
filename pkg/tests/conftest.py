import pytest

from optimev.fixture import write_fixture

_acceptance: list[tuple[str, str]] = []
_titles: dict[str, str] = {}


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fixture")
    write_fixture(d, days=3, seed=7)
    return d


def pytest_collection_modifyitems(items):
    for item in items:
        doc = getattr(item.obj, "__doc__", None)
        if doc:
            _titles[item.nodeid] = doc.strip().splitlines()[0]


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        title = _titles.get(report.nodeid, report.nodeid.split("::")[-1])
        _acceptance.append((title, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for title, outcome in _acceptance:
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{mark}] {title}")
