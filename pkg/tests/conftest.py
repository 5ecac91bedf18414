import pathlib

import pytest

from irterm import ir
from irterm.logic import Oracle
from irterm.seg import SegBuilder

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def countdown_text() -> str:
    return (FIXTURES / "countdown.ll").read_text()


@pytest.fixture(scope="session")
def countdown(countdown_text) -> ir.Program:
    return ir.parse(countdown_text)


@pytest.fixture(scope="session")
def countdown_build(countdown):
    """Built graph plus its builder, whose call bindings some tests need."""
    b = SegBuilder(countdown, oracle=Oracle())
    b.add_root("main")
    g = b.run()
    g.capped = b.capped
    return g, b


@pytest.fixture(scope="session")
def countdown_seg(countdown_build):
    return countdown_build[0]


def fixture_path(name: str) -> pathlib.Path:
    return FIXTURES / name
