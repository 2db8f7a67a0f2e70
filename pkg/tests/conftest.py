"""
Shared fixtures for the MRTS test suite.
"""

from pathlib import Path

import numpy as np
import pytest

from mrts.core.basis import get_spin_system
from mrts.core.hamiltonian import ModelParams, Orientation
from mrts.core.lindblad import RateParams
from mrts.services.dynamics_service import reset_dynamics_service
from mrts.services.exchange_service import reset_exchange_service
from mrts.services.spectrum_service import reset_spectrum_service

PROJECT_ROOT = Path(__file__).parent.parent
DEFAULT_CONFIG = PROJECT_ROOT / "configs" / "default.toml"
ENERGY_DIR = PROJECT_ROOT / "configs" / "energies"


@pytest.fixture(autouse=True)
def fresh_services():
    """Every test starts from unset service singletons."""
    reset_dynamics_service()
    reset_spectrum_service()
    reset_exchange_service()
    yield
    reset_dynamics_service()
    reset_spectrum_service()
    reset_exchange_service()


@pytest.fixture
def spin_system():
    return get_spin_system()


@pytest.fixture
def default_params():
    """Shipped couplings and ZFS (J in mT-equivalents, ZFS in cm-1) with a half-transfer drive."""
    return ModelParams.from_quantities({
        "J0": "1 mT",
        "J1": "-10 mT",
        "J2": "-10 mT",
        "J3": "0 mT",
        "D": "0.0715 cm-1",
        "E": "0.004 cm-1",
        "V": "157.08 rad/ns",
        "B_mag": "350 mT",
        "pulse_window": (0.0, 0.005),
    })


@pytest.fixture
def default_rates():
    return RateParams(gamma_radical=0.1, gamma_triplet=0.1, k_st=100.0, k_tg=0.2, k_eg=1.0)


@pytest.fixture
def tilted():
    return Orientation(theta=0.7, phi=1.3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_density(rng):
    """Random full-rank 20x20 density matrix."""
    def build(dim: int = 20) -> np.ndarray:
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = a @ a.conj().T
        return rho / np.trace(rho)
    return build
