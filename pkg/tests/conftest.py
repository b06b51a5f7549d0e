import sys

import numpy as np
import pytest

from vlawe.codebook import Codebook
from vlawe.embeddings import EmbeddingTable

# registry for the acceptance suite: number -> (name, passed, detail)
_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record_criterion(number: int, name: str, passed: bool, detail: str = "") -> None:
    """Record and assert one acceptance criterion outcome."""
    _ACCEPTANCE[number] = (name, bool(passed), detail)
    line = _format_criterion(number)
    print(line, file=sys.stderr)
    assert passed, line


def _format_criterion(number: int) -> str:
    name, passed, detail = _ACCEPTANCE[number]
    line = f"criterion {number:02d} {name}: {'PASS' if passed else 'FAIL'}"
    return f"{line} ({detail})" if detail else line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_format_criterion(number))


@pytest.fixture
def tiny_table() -> EmbeddingTable:
    words = ["the", "cat", "sat", "mat", "dog", "ran"]
    vectors = np.array(
        [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
            [10.0, 0.0],
            [10.0, 1.0],
        ]
    )
    return EmbeddingTable(words, vectors)


@pytest.fixture
def toy_codebook() -> Codebook:
    return Codebook(
        centroids=np.array([[0.0, 0.0], [10.0, 10.0]]),
        inertia=0.0,
        iterations_run=1,
        seed=0,
    )
