import numpy as np
import pytest

from ttsdiffusion import SystemParams, TrigPerturbation

GOLDEN_BETA = (1.0, 0.6180339887498949)


def reference_params(eps=0.04, a=0.5, c=0.01):
    mu = c * min(eps ** 1.5, eps ** (2 * a + 1))
    return SystemParams(eps=eps, a=a, beta=GOLDEN_BETA, mu=mu)


@pytest.fixture
def ref_params():
    return reference_params()


@pytest.fixture
def cos3():
    return TrigPerturbation.cosine_sum(3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
