import numpy as np
import pytest

from bayespec import kernel
from bayespec.models import GaussianFixed, ModelSpec, Normal, Polynomial, Spectrum


@pytest.fixture(params=kernel.available_backends())
def backend(request):
    previous = kernel.use_backend(request.param)
    yield request.param
    kernel.use_backend(previous)


def conjugate_problem(n=50, seed=0):
    """y = theta + N(0, 1) noise with a N(0, 1) prior; returns spec, data, log Z."""
    rng = np.random.default_rng(seed)
    ys = 0.3 + rng.standard_normal(n)
    data = Spectrum(np.arange(n, dtype=float), ys)
    spec = ModelSpec(Polynomial(0), (Normal(0.0, 1.0),), GaussianFixed(1.0))
    s, ss = ys.sum(), (ys * ys).sum()
    # marginal of y is N(0, I + 11^T): det = 1 + n, quadratic form via Sherman-Morrison
    quad = ss - s * s / (1.0 + n)
    log_z = -0.5 * n * np.log(2 * np.pi) - 0.5 * np.log(1.0 + n) - 0.5 * quad
    return spec, data, float(log_z)


@pytest.fixture
def conjugate():
    return conjugate_problem()


ACCEPTANCE: list = []


def record_criterion(label: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
