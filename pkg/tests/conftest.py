import pytest

from runway_toolkit import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    kernels.warm_up()
