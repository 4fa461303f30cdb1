import numpy as np
import pytest
from oracles import crandn  # noqa: F401  (re-exported for tests)

from pass_cellfree.scenario import SystemConfig, build_scenario


def random_psd(rng, n, rank=None):
    X = crandn(rng, n, rank or n)
    return X @ X.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def demo_config():
    return SystemConfig()


@pytest.fixture
def small_scenario():
    cfg = SystemConfig(L=2, N=2, M=3, K=2, rng_seed=7)
    return build_scenario(cfg)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
