import numpy as np
import pytest

from htype_harnack.group import heisenberg, quaternionic, r5_example


@pytest.fixture
def H1():
    return heisenberg(1)


@pytest.fixture
def H2():
    return heisenberg(2)


@pytest.fixture
def Q2():
    return quaternionic(2)


@pytest.fixture
def R5():
    return r5_example()


@pytest.fixture(params=["heisenberg:1", "heisenberg:2", "quaternionic:2", "r5_example"])
def any_group(request):
    from htype_harnack.group import preset

    return preset(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_points(spec, rng, count=100, lo=0.5, hi=2.0):
    """Random chart points with gauge in ``[lo, hi]``."""
    from htype_harnack.gauge import gauge_norm
    from htype_harnack.group import dilate

    p = spec.from_frame(rng.normal(size=(count, spec.N)))
    d = gauge_norm(spec, p)
    target = rng.uniform(lo, hi, size=count)
    return np.stack([dilate(spec, t / s, q) for q, s, t in zip(p, d, target)])


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LOG = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LOG:
        terminalreporter.write_line(line)
