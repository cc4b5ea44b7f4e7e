"""Shared fixtures and the acceptance-suite terminal summary."""

from __future__ import annotations

from pathlib import Path

import pytest

from fedsust.config import load_scenario
from fedsust.refdata import ReferenceTables

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "fedsust" / "data"
SCENARIO_DIR = DATA_DIR / "scenarios"
PILLAR_DIR = DATA_DIR / "pillars"

# One entry per acceptance criterion: (criterion, passed, detail).
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((name, passed, detail))


@pytest.fixture(scope="session")
def tables() -> ReferenceTables:
    return ReferenceTables.load()


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return SCENARIO_DIR


@pytest.fixture(scope="session")
def pillar_dir() -> Path:
    return PILLAR_DIR


@pytest.fixture()
def uc_configs():
    return {name: load_scenario(SCENARIO_DIR / f"uc_{name}.json") for name in "abcd"}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        line = f"{status}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
