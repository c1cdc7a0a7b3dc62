import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from tenantopt.builder import ModelConfig, Scenario, TimeSlice
from tenantopt.io import load_bundled_building


@pytest.fixture(scope="session")
def building1():
    return load_bundled_building("building-1")


@pytest.fixture(scope="session")
def make_scn(building1):
    """Scenario factory on the first hours of building 1."""

    def make(techs=("boiler", "heat_storage"), hours=48, chp=0.0, building=None, **config):
        cfg = ModelConfig(
            technologies=frozenset(techs),
            chp_capacity=chp,
            time_slice=TimeSlice.first_hours(hours, 8760 / hours),
            name=config.pop("name", "test"),
            **config,
        )
        return Scenario(building or building1, config=cfg)

    return make


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per ``@pytest.mark.criterion(n, text)``

_VERDICTS: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, text = marker.args
    entry = _VERDICTS.setdefault(number, [text, True, []])
    if report.failed or report.skipped:
        entry[1] = False
        entry[2].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        text, ok, failed = _VERDICTS[number]
        tail = "" if ok else f"  ({', '.join(failed)})"
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}{tail}")
