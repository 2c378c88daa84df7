from __future__ import annotations

import pytest

from fixlab import backend, kernels
from fixlab.space import analytic_space


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # One-time JIT compile so timed assertions measure steady state.
    kernels.warmup()


@pytest.fixture(params=["numba", "numpy"])
def each_backend(request):
    """Run the test once per kernel backend."""
    name = request.param
    if name == "numba" and not backend.numba_available():
        pytest.skip("numba not importable")
    with backend.use(name):
        yield name


@pytest.fixture(scope="session")
def abs_space():
    return analytic_space("abs(x - y)", 0.0, 1.0)


@pytest.fixture(scope="session")
def max_space():
    return analytic_space("max(x, y)", 0.0, 1.0)


@pytest.fixture(scope="session")
def sum_space():
    return analytic_space("x + y", 0.0, 1.0)
