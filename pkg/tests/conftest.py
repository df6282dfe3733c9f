"""Test configuration file."""

import pytest
import sys
import os

import numpy as np

# Add the repository root to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.network.system_model import NetworkInstance, SystemParams, generate_instance


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale reproduction checks (minutes)")


def build_instance(device_positions, beacon_positions, params=None, link_fading=None,
                   beacon_fading=None):
    """Hand-placed instance with unit fading unless given."""
    devices = np.asarray(device_positions, dtype=float)
    beacons = np.asarray(beacon_positions, dtype=float).reshape(-1, 2)
    nd, nb = len(devices), len(beacons)
    return NetworkInstance(
        n_devices=nd,
        n_beacons=nb,
        device_positions=devices,
        beacon_positions=beacons,
        link_fading=np.ones((nd, nd + 1)) if link_fading is None else link_fading,
        beacon_fading=np.ones((nb, nd)) if beacon_fading is None else beacon_fading,
        params=params or SystemParams(),
    )


@pytest.fixture
def make_instance():
    return build_instance


@pytest.fixture
def small_instance():
    """Seeded N_d=3, N_b=2 instance."""
    return generate_instance(11, 3, 2)


@pytest.fixture
def medium_instance():
    """Seeded N_d=5, N_b=2 instance."""
    return generate_instance(5, 5, 2)
