from __future__ import annotations

from pathlib import Path

import pytest

from triguard.parser import Program, parse_program

ROOT = Path(__file__).resolve().parent.parent
PROGRAMS = ROOT / "programs"


def load(name: str) -> Program:
    return parse_program((PROGRAMS / f"{name}.tgd").read_text())


@pytest.fixture(scope="session")
def sigma1() -> Program:
    return load("sigma1")


@pytest.fixture(scope="session")
def sigma2() -> Program:
    return load("sigma2")


@pytest.fixture(scope="session")
def sigma2_q() -> Program:
    return load("sigma2_q")


@pytest.fixture(scope="session")
def sigma3() -> Program:
    return load("sigma3")


_criteria: dict[int, tuple[str, bool]] = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    num, title = marker
    ok = report.passed and _criteria.get(num, (title, True))[1]
    if report.when == "call" or not report.passed:
        _criteria[num] = (title, ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = m.args


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, ok = _criteria[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {num}: {title}")
