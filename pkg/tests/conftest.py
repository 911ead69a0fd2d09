import numpy as np
import pytest

from mfscope.synth import CascadeSpec, FgnSpec, generate_binomial_cascade, generate_fgn

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def cascade_06():
    return generate_binomial_cascade(CascadeSpec(0.6, 16))


@pytest.fixture(scope="session")
def fgn_series():
    cache = {}

    def get(hurst, seed=0, n=2 ** 16):
        key = (hurst, seed, n)
        if key not in cache:
            cache[key] = generate_fgn(FgnSpec(hurst, n, seed=seed))
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
