from __future__ import annotations

from pathlib import Path

import pytest

from leadfollow.panel import ingest_observations, read_categories

DATA = Path(__file__).resolve().parent / "data"
GOLDEN = Path(__file__).resolve().parent / "golden"
CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def fixture_panel():
    return ingest_observations((DATA / "fixture_observations.csv").read_bytes())


@pytest.fixture
def fixture_categories():
    return read_categories((DATA / "fixture_categories.csv").read_bytes())


VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[VERDICTS] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        line = f"{'PASS' if report.passed else 'FAIL'} criterion {marker.args[0]}: {marker.args[1]}"
        item.config.stash[VERDICTS].append((marker.args[0], line + (f" ({detail})" if detail else "")))


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(VERDICTS, [])
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(verdicts):
            terminalreporter.write_line(line)
