"""Shared, session-cached sweeps: the 3D scenarios cost seconds per scale."""

from __future__ import annotations

import pytest

from remova.conv import Problem
from remova.criterion import decide
from remova.mollify import EpsilonSchedule
from remova.scenarios import lookup

_PROBLEMS: dict = {}
_VERDICTS: dict = {}


def problem(name: str, **changes) -> Problem:
    key = (name, tuple(sorted((k, repr(v)) for k, v in changes.items())))
    if key not in _PROBLEMS:
        s = lookup(name)
        base = _PROBLEMS.setdefault((name, ()), Problem(s.u, s.P, name=name))
        _PROBLEMS[key] = base.with_(**changes) if changes else base
    return _PROBLEMS[key]


def verdict(name: str, r="inf", sched: EpsilonSchedule = EpsilonSchedule(), p=None, **changes):
    key = (name, str(r), sched, str(p), tuple(sorted((k, repr(v)) for k, v in changes.items())))
    if key not in _VERDICTS:
        _VERDICTS[key] = decide(problem(name, **changes), sched, r, p)
    return _VERDICTS[key]


@pytest.fixture(scope="session")
def get_problem():
    return problem


@pytest.fixture(scope="session")
def get_verdict():
    return verdict


# ------------------------------------------------------------ acceptance report

_ACCEPT: dict = {}


def pytest_runtest_logreport(report):
    crit = getattr(report, "acceptance", None)
    if crit is None:
        return
    if report.when == "call" or report.outcome != "passed":
        ok, titles = _ACCEPT.get(crit[0], (True, crit[1]))
        _ACCEPT[crit[0]] = (ok and report.outcome == "passed", titles)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("acceptance")
    if mark is not None:
        outcome.get_result().acceptance = mark.args


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPT:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(_ACCEPT):
        ok, title = _ACCEPT[i]
        terminalreporter.write_line(f"criterion {i:2d} {'PASS' if ok else 'FAIL'}  {title}")
