import os
import sys
from fractions import Fraction

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from utils.logger import Logger  # noqa: E402
from utils.settings import DEFAULT_SETTINGS  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale runs over many seeded inputs")


@pytest.fixture
def logger() -> Logger:
    return Logger.quiet()


@pytest.fixture
def settings(tmp_path) -> dict:
    out = dict(DEFAULT_SETTINGS)
    out["bench_dir"] = str(tmp_path / "bench")
    return out


def tiny(N: int = 2):
    """Heavy agent 0 wants only item 0, which is h(A) of light agent 1;
    light agent 1 wants N of the items 1 and 2."""
    from models.canonical import CanonicalInstance, LightAgent

    return CanonicalInstance(
        Fraction(2),
        Fraction(0),
        3,
        {0: frozenset({0})},
        {1: LightAgent(0, N, frozenset({1, 2}))},
    )


@pytest.fixture
def tiny_canonical():
    return tiny()
