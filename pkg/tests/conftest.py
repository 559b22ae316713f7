import numpy as np
import pytest

from cdfchaos import kernels
from cdfchaos.flux import make_builtin_flux


@pytest.fixture
def burgers():
    return make_builtin_flux("burgers")


@pytest.fixture
def cubic():
    return make_builtin_flux("cubic")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


BACKENDS = [kernels.fallback] + ([kernels.compiled] if kernels.compiled is not None else [])


@pytest.fixture(params=BACKENDS, ids=lambda m: m.BACKEND)
def backend(request):
    return request.param


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
