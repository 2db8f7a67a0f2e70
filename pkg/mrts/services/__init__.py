"""
Services package for the MRTS simulator.
Contains the dynamics, spectrum and exchange-extraction services.
"""

from .dynamics_service import DynamicsService, initialize_dynamics_service, get_dynamics_service
from .spectrum_service import SpectrumService, initialize_spectrum_service, get_spectrum_service
from .exchange_service import ExchangeService, initialize_exchange_service, get_exchange_service
from .initialization import initialize_all_services, check_service_health

__all__ = [
    # Dynamics service
    "DynamicsService",
    "initialize_dynamics_service",
    "get_dynamics_service",

    # Spectrum service
    "SpectrumService",
    "initialize_spectrum_service",
    "get_spectrum_service",

    # Exchange service
    "ExchangeService",
    "initialize_exchange_service",
    "get_exchange_service",

    # Initialization helpers
    "initialize_all_services",
    "check_service_health",
]
