"""
Service initialization helper for the MRTS simulator.
Provides centralized initialization of all services and a health report.
"""

from typing import Any, Dict
import logging

from ..core.basis import get_spin_system
from ..core.constants import (
    EXPECTED_JUMP_COUNTS,
    HILBERT_DIM,
    LIOUVILLE_DIM,
    COUPLED_STATE_TOL,
    J3_NEGLIGIBLE_RATIO,
)
from ..core.lindblad import RateParams, all_jump_sets, dissipator

from .dynamics_service import initialize_dynamics_service, get_dynamics_service
from .spectrum_service import initialize_spectrum_service, get_spectrum_service
from .exchange_service import initialize_exchange_service, get_exchange_service

logger = logging.getLogger(__name__)


def initialize_all_services(
    solver: str = "lu",
    exchange_unit: str = "K",
    j3_ratio: float = J3_NEGLIGIBLE_RATIO
) -> Dict[str, Any]:
    """
    Initialize all services in dependency order.

    Args:
        solver: Resolvent solver for the spectrum service ('lu' or 'schur')
        exchange_unit: Output unit of the exchange service
        j3_ratio: |J3| / |J0| threshold below which J3 is flagged negligible

    Returns:
        Dict with initialization results and service instances
    """
    results: Dict[str, Any] = {}
    steps = (
        ("dynamics_service", lambda: initialize_dynamics_service()),
        ("spectrum_service", lambda: initialize_spectrum_service(solver)),
        ("exchange_service", lambda: initialize_exchange_service(exchange_unit, j3_ratio)),
    )
    for name, factory in steps:
        try:
            results[name] = {"success": True, "instance": factory()}
        except Exception as e:
            logger.error(f"Failed to initialize {name}: {e}")
            results[name] = {"success": False, "error": f"Failed to initialize {name}: {e}"}

    success = all(item["success"] for item in results.values())
    logger.info(f"Service initialization {'complete' if success else 'incomplete'}")
    return {"success": success, "services": results}


def check_service_health() -> Dict[str, Any]:
    """
    Check the shared spin system, the dissipator cache and every service.

    Returns:
        Dict with per-component status and an overall flag
    """
    health: Dict[str, Any] = {}

    try:
        system = get_spin_system()
        residual = system.check_coupled_states()
        counts = {js.name: len(js) for js in all_jump_sets(RateParams())}
        healthy = (
            system.dim == HILBERT_DIM
            and residual <= COUPLED_STATE_TOL
            and counts == EXPECTED_JUMP_COUNTS
        )
        health["spin_system"] = {
            "status": "healthy" if healthy else "unhealthy",
            "hilbert_dim": system.dim,
            "liouville_dim": LIOUVILLE_DIM,
            "coupled_state_residual": residual,
            "jump_counts": counts,
        }
    except Exception as e:
        health["spin_system"] = {"status": "unhealthy", "error": str(e)}

    info = dissipator.cache_info()
    health["dissipator_cache"] = {
        "status": "healthy",
        "hits": info.hits,
        "misses": info.misses,
        "size": info.currsize,
    }

    try:
        health["dynamics_service"] = {
            "status": "healthy",
            "propagator_cache": get_dynamics_service().get_cache_stats(),
        }
    except Exception as e:
        health["dynamics_service"] = {"status": "unhealthy", "error": str(e)}

    try:
        health["spectrum_service"] = {"status": "healthy", "solver": get_spectrum_service().solver}
    except Exception as e:
        health["spectrum_service"] = {"status": "unhealthy", "error": str(e)}

    try:
        service = get_exchange_service()
        health["exchange_service"] = {"status": "healthy", "unit": service.unit}
    except Exception as e:
        health["exchange_service"] = {"status": "unhealthy", "error": str(e)}

    overall = all(item.get("status") == "healthy" for item in health.values())
    return {"overall_health": "healthy" if overall else "degraded", "services": health}
