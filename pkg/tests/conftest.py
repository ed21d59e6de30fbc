import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bmflow.partition import build_quadrature, default_quadrature

settings.register_profile("bmflow", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("bmflow")


@pytest.fixture(scope="session")
def quad():
    return default_quadrature(32, 64)


@pytest.fixture(scope="session")
def small_quad():
    return build_quadrature(16, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_physical(rng, margin=0.05):
    """A random Q whose eigenvalues stay ``margin`` inside the physical range."""
    b = rng.dirichlet(np.ones(3))
    b = margin + (1 - 3 * margin) * b
    r = random_rotation(rng)
    return r @ np.diag(b - 1 / 3) @ r.T


def random_unit_traceless(rng):
    v = rng.standard_normal((3, 3))
    v = 0.5 * (v + v.T)
    v -= np.trace(v) / 3 * np.eye(3)
    return v / np.linalg.norm(v)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
