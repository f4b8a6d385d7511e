import numpy as np
import pytest
from hypothesis import settings

import mapraster
from mapraster.geometry import GridSpec

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=mapraster.available_backends())
def backend(request):
    previous = mapraster.get_backend()
    mapraster.set_backend(request.param)
    yield request.param
    mapraster.set_backend(previous)


@pytest.fixture
def px_grid64():
    """64x64 grid where one meter is one pixel."""
    return GridSpec(0.0, 64.0, 0.0, 64.0, width=64, height=64)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
