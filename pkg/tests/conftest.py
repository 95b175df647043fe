import numpy as np
import pytest

from kacbc.lattice import Torus, build_kac_kernel, build_mother_kernel


@pytest.fixture(scope="session")
def mother():
    return build_mother_kernel()


@pytest.fixture(scope="session")
def kernel_g02(mother):
    return build_kac_kernel(0.2, Torus(25), mother)


@pytest.fixture(scope="session")
def kernel_g01(mother):
    return build_kac_kernel(0.1, Torus(100), mother)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
