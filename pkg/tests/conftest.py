import math

import pytest

from cvdistill import fock, gaussian


@pytest.fixture(scope="session")
def replaced_tmsv_20():
    """Photon-replaced two-mode squeezed pair, the standard non-Gaussian
    test input: r = 0.4, eta^2 = 0.3, cutoff 20 (pure, rank one)."""
    rho = fock.fock_tmsv(0.4, 20)
    out, _ = fock.photon_replacement(rho, math.sqrt(0.3))
    return out


@pytest.fixture(scope="session")
def thermal_filter_2():
    return gaussian.thermal_filter(1.0, modes=2)


@pytest.fixture(scope="session")
def thermal_filter_1():
    return gaussian.thermal_filter(1.0, modes=1)
