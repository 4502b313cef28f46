import pytest

import config
from core.kinematic_controller import KinGains
from core.path_geometry import build_path, l_path_segments
from core.vehicle import VehicleParams


@pytest.fixture
def nominal():
    return VehicleParams.from_dict(config.NOMINAL_VEHICLE)


@pytest.fixture
def perturbed():
    return VehicleParams.from_dict(config.PERTURBED_VEHICLE)


@pytest.fixture
def l_path():
    return build_path(l_path_segments())


@pytest.fixture
def gains():
    return KinGains()
