from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conley_transit import load_model  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "conley_transit" / "data"

# criterion number -> (title, passed, seconds, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, bool, float, str]] = {}


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def pitchfork():
    return load_model(DATA / "pitchfork.json")


@pytest.fixture(scope="session")
def eightset():
    return load_model(DATA / "eightset.json")


@pytest.fixture(scope="session")
def fivepoint():
    return load_model(DATA / "fivepoint.json")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        title, ok, secs, detail = ACCEPTANCE[k]
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {title}  ({secs:.2f} s)"
        if detail:
            line += f"  {detail}"
        terminalreporter.write_line(line)
