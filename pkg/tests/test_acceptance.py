"""Runs every acceptance criterion at its stated tolerance; one line per criterion."""

import pytest

from conftest import ACCEPTANCE_LINES
from grouptest.acceptance import CRITERIA, _Floor, format_result, run_criterion

_FLOOR = _Floor()


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion_{n:02d}")
def test_criterion(number):
    result = run_criterion(number, seed=0, floor=_FLOOR)
    line = format_result(result)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.passed, line
