import pytest
import numpy as np

from src.core import config as config_module
from src.core.config import ConfigLoader, DoslabSettings
from src.core.log_setup import configure_logging
from src.core.seeding import make_rng
from tests.fixtures.sample_data import identity_circuit, planted_circuit, sum_z_hamiltonian, transverse_ising

_MODULES_WITH_CONFIG = (
    'src.core.numkit', 'src.core.qcirc', 'src.core.bqpcount', 'src.core.clockcomp',
    'src.core.hamdos', 'src.core.pathsum', 'src.integrations.report_exporter',
)


@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    """Keep test output free of info-level events"""
    configure_logging("WARNING")


@pytest.fixture
def rng():
    """Seeded generator for randomized checks"""
    return make_rng(20240601)


@pytest.fixture
def identity_2x2():
    """Identity circuit with n = m = 2"""
    return identity_circuit(2, 2)


@pytest.fixture
def planted_n2_d2():
    """Planted verifier (n=2, d=2, eps 0) of length 3"""
    return planted_circuit(2, 2, 0.0, seed=9, extra=2)


@pytest.fixture
def sum_z3():
    """Z_0 + Z_1 + Z_2"""
    return sum_z_hamiltonian(3)


@pytest.fixture
def ising3():
    """Three-site transverse-field Ising chain"""
    return transverse_ising(3)


@pytest.fixture
def override_config(monkeypatch):
    """Install a ConfigLoader with the given settings in every core module."""
    import importlib

    def install(config_path=None, **settings):
        loader = ConfigLoader(config_path=config_path, settings=DoslabSettings(**settings))
        monkeypatch.setattr(config_module, 'config_loader', loader)
        for name in _MODULES_WITH_CONFIG:
            monkeypatch.setattr(importlib.import_module(name), 'config_loader', loader)
        return loader

    return install
