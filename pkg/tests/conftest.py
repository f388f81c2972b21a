from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))

FIG1 = TESTS / "fixtures" / "fig1"
LLAMA = TESTS / "data" / "llama_cpp"


@pytest.fixture
def make_project(tmp_path):
    """Write ``{relative path: text}`` into a fresh directory and return it."""

    def make(files: dict[str, str]) -> Path:
        for rel, text in files.items():
            path = tmp_path / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        return tmp_path

    return make
