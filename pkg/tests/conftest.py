from __future__ import annotations

import os
import stat
from pathlib import Path

import pytest

from streamforge.aspkit import parse_program

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "streamforge" / "fixtures"
TOY = FIXTURES / "benchmarks" / "toy"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def toy_dir() -> Path:
    return TOY


def parse_one(text: str):
    statements, errors = parse_program(text)
    assert not errors, [str(e) for e in errors]
    assert len(statements) == 1
    return statements[0]


@pytest.fixture
def make_stub_solver(tmp_path):
    """Write a small executable standing in for an external solver."""

    def _make(name: str, body: str) -> str:
        path = tmp_path / name
        path.write_text("#!/bin/sh\n" + body)
        path.chmod(path.stat().st_mode | stat.S_IEXEC)
        return str(path)

    return _make


def external_solver_path() -> str | None:
    return os.environ.get("STREAMFORGE_SOLVER")


requires_external_solver = pytest.mark.skipif(
    external_solver_path() is None,
    reason="no external solver configured (set STREAMFORGE_SOLVER)",
)
