import sys
from fractions import Fraction
from pathlib import Path

import mpmath as mp
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hankel_painleve import PrecisionContext, WeightParams, build_cell  # noqa: E402
from hankel_painleve.painleve_verify import build_stencil  # noqa: E402

_CELLS = {}
_STENCILS = {}


def cell_for(params: WeightParams, n_max: int, prec: PrecisionContext | None = None):
    """Session-wide memo of pipeline cells (they are pure functions of their inputs)."""
    prec = prec or PrecisionContext()
    key = (params, n_max, prec)
    if key not in _CELLS:
        _CELLS[key] = build_cell(params, prec, n_max)
    return _CELLS[key]


def stencil_for(params: WeightParams, n_max: int, prec: PrecisionContext | None = None):
    prec = prec or PrecisionContext()
    key = (params, n_max, prec)
    if key not in _STENCILS:
        _STENCILS[key] = build_stencil(params, prec, n_max)
    return _STENCILS[key]


@pytest.fixture(scope="session")
def prec():
    return PrecisionContext()


@pytest.fixture(scope="session")
def standard():
    """alpha = beta = gamma = 1, A = B = 1, t = 1/2."""
    return WeightParams(1, 1, 1, 1, 1, Fraction(1, 2))


@pytest.fixture
def work(prec):
    with prec.workprec():
        yield mp


_ACCEPTANCE = []


def record_criterion(line: str):
    _ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
