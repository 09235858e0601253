import numpy as np
import pytest

from finsler import zoo
from finsler.sampling import sample_bundles

_CACHE: dict = {}


def bundles(name: str, count: int = 30, seed: int = 42):
    """Seeded bundles for a zoo entry, shared across the session."""
    key = (name, count, seed)
    if key not in _CACHE:
        _CACHE[key] = sample_bundles(zoo.load(name), count, seed)
    return _CACHE[key]


@pytest.fixture(params=zoo.ZOO)
def zoo_name(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[number][1])
