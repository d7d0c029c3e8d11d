import pytest

from turnsync.config import config_from_dict


def make_config(agents=("A", "B"), **sections):
    return config_from_dict({"agents": list(agents), **sections})


@pytest.fixture
def dyad():
    return make_config(run={"ticks": 300, "seed": 3})


_criteria: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        _criteria[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, verdict, detail = _criteria[number]
        line = f"criterion {number} [{verdict}] {title}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)
