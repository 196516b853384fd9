import numpy as np
import pytest

from hinfland.lti import Controller
from hinfland.systems import example_plant


@pytest.fixture
def plant():
    return example_plant()


@pytest.fixture
def k_simple():
    # T_zw = diag(1/(s+1), 0): the controller state is decoupled
    return Controller([[0.0, 1.0], [0.0, -1.0]], 1, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synth():
    from hinfland.synthesis import min_gamma

    return min_gamma(example_plant())


@pytest.fixture(scope="session")
def better_triple(synth):
    from hinfland.lifting import CertifiedTriple

    return CertifiedTriple(synth.k_star, synth.cert.P, synth.gamma_star)
