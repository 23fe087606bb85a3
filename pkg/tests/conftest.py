import warnings

import numpy as np
import pytest

from sodsense.model import make_instance
from sodsense.optimize import GdConfig, gradient_descent, small_init
from sodsense.spectral import analyze_critical_point


@pytest.fixture(scope="session")
def basic():
    return make_instance("basic", {})


@pytest.fixture(scope="session")
def basic_analysis(basic):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return analyze_critical_point(basic, np.array([[0.0], [1 / np.sqrt(2)]]), 1e-12)


@pytest.fixture(scope="session")
def real_world():
    return make_instance("real_world", {})


@pytest.fixture(scope="session")
def real_analysis(real_world):
    X0 = small_init(3, 1, 1.0, 9)
    pre = gradient_descent(real_world, X0, GdConfig(0.1, 100))
    ref = gradient_descent(real_world, pre.final, GdConfig(0.1, 100000, 1e-12, 100000))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return analyze_critical_point(real_world, ref.final, 1e-9)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
