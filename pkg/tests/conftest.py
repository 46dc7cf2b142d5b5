import sys
import numpy as np
import pytest

from bullwhipkit.config import ChainConfig, EchelonConfig, builtin_chain


@pytest.fixture
def semi():
    return builtin_chain("semiconductor_4tier")


def make_chain(lead_times, h=1.0, b=1.0, name="test"):
    return ChainConfig(name, tuple(EchelonConfig(f"E{i + 1}", L, h, b) for i, L in enumerate(lead_times)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
