import functools
import warnings

import numpy as np
import pytest

from moebius_energy import shapes
from moebius_energy.surface_energy import conformalize

ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def conformal_ellipsoid(a: float, b: float, c: float, subdiv: int):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return conformalize(shapes.ellipsoid(a, b, c, subdiv))


@pytest.fixture(scope="session")
def ellipsoid4():
    return conformal_ellipsoid(2.0, 1.0, 1.0, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rigid(rng, n=3):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r)), rng.normal(size=n) * 3.0


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
