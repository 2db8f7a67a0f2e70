"""
Core modules for the MRTS simulator.
Provides spin algebra, the Hamiltonian, the Liouvillian, units and configuration.
"""

# Core modules
from . import constants
from . import exceptions

from .spin import SpinOps, spin_matrices, gell_mann_matrices, clebsch_gordan
from .basis import (
    CompositeBasis,
    CoupledState,
    SpinSystem,
    embed,
    total_spin_ops,
    coupled_states,
    resolve_state,
    get_spin_system,
)
from .hamiltonian import ModelParams, Orientation, h_ground, h_triplet, h_total
from .lindblad import (
    RateParams,
    JumpSet,
    Liouvillian,
    radical_jump_ops,
    triplet_jump_ops,
    isc_ops,
    triplet_decay_ops,
    fluorescence_ops,
    lindblad_superop,
    build_liouvillian,
    vectorize,
    devectorize,
)
from .units import Quantity

__all__ = [
    # Constants and exceptions
    'constants',
    'exceptions',

    # Spin algebra
    'SpinOps',
    'spin_matrices',
    'gell_mann_matrices',
    'clebsch_gordan',
    'CompositeBasis',
    'CoupledState',
    'SpinSystem',
    'embed',
    'total_spin_ops',
    'coupled_states',
    'resolve_state',
    'get_spin_system',

    # Hamiltonian
    'ModelParams',
    'Orientation',
    'h_ground',
    'h_triplet',
    'h_total',

    # Liouvillian
    'RateParams',
    'JumpSet',
    'Liouvillian',
    'radical_jump_ops',
    'triplet_jump_ops',
    'isc_ops',
    'triplet_decay_ops',
    'fluorescence_ops',
    'lindblad_superop',
    'build_liouvillian',
    'vectorize',
    'devectorize',

    # Units
    'Quantity',
]
