import pytest

from waveray.integrator import run
from waveray.model import SimConfig
from waveray.profiles import Algebraic, Gaussian


@pytest.fixture(scope="session")
def gaussian_run():
    return run(SimConfig(profile=Gaussian(0.1), n_rays=101, span=30.0, d_tau=0.1, zeta_max=700.0))


@pytest.fixture(scope="session")
def algebraic_run():
    return run(SimConfig(profile=Algebraic(0.1, 1), n_rays=101, span=30.0, d_tau=0.1, zeta_max=700.0, output_stride=5))
