import warnings

import pytest

from scatomchip.condensate import ThomasFermiValidityWarning
from scatomchip.fluxloop import flux_state, half_flux_bias
from scatomchip.magnetostatics import CurrentLoop, z_trap_geometry
from scatomchip.trap import find_minimum

LOOP_R = 5e-6


@pytest.fixture(autouse=True)
def _quiet_tf():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ThomasFermiValidityWarning)
        yield


@pytest.fixture(scope="session")
def default_geometry():
    return z_trap_geometry(bias_z=half_flux_bias(LOOP_R))


@pytest.fixture(scope="session")
def default_trap(default_geometry):
    return find_minimum(default_geometry)


@pytest.fixture(scope="session")
def default_flux(default_geometry, default_trap):
    loop = CurrentLoop((0.0, 0.0, default_trap.minimum[2] - 1e-5), LOOP_R)
    return flux_state(loop, default_geometry)
