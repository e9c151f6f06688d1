import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from laplace_learn import kernels

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture]
)
settings.load_profile("default")


def random_spd(rng, n, cond=10.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    ev = np.exp(rng.uniform(0, np.log(cond), size=n))
    return (q * ev) @ q.T


def random_statistic(rng, n, ratio=3):
    x = rng.normal(size=(ratio * n, n)) @ rng.normal(size=(n, n))
    x -= x.mean(axis=0)
    return x.T @ x / x.shape[0]


def random_mask(rng, n, density=0.6):
    a = np.triu((rng.random((n, n)) < density).astype(np.int8), 1)
    return a + a.T


def random_cgl(rng, n, density=0.6, connected=True):
    while True:
        a = random_mask(rng, n, density)
        w = np.triu(rng.uniform(0.1, 3.0, size=(n, n)), 1) * a
        w = w + w.T
        lap = np.diag(w.sum(axis=1)) - w
        if not connected or np.linalg.eigvalsh(lap)[1] > 1e-8:
            return lap


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    with kernels.use_backend(request.param):
        yield request.param


_ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line; all lines are repeated in the terminal summary."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(label, passed, detail=""):
        line = f"{label}: {'PASS' if passed else 'FAIL'}" + (f"  ({detail})" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
