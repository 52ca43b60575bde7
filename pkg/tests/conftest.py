import warnings

import numpy as np
import pytest

warnings.filterwarnings("ignore", category=Warning, module="numba")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spd(rng, p, jitter=0.5):
    a = rng.standard_normal((p, p))
    return a @ a.T / p + jitter * np.eye(p)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: replicated simulation benchmarks (minutes)")


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
