"""
Jump operators, Lindblad dissipators and the 400x400 Liouvillian.

Vectorization is column-stacking: vec(A rho B) = (B^T (x) A) vec(rho).
"""

import logging
import math
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .constants import (
    CHANNEL_RADICAL,
    CHANNEL_TRIPLET,
    CHANNEL_ISC,
    CHANNEL_TRIPLET_DECAY,
    CHANNEL_FLUORESCENCE,
    EXPECTED_JUMP_COUNTS,
    HILBERT_DIM,
    MANIFOLD_S0,
    MANIFOLD_S1,
    MANIFOLD_T1,
    SLOT_RADICAL1,
    SLOT_RADICAL2,
    SLOT_COUPLER,
)
from .exceptions import DimensionMismatchError, InvalidParameterError, BasisError
from .basis import embed, get_spin_system, transition
from .hamiltonian import ModelParams, Orientation, h_total
from .spin import spin_matrices, gell_mann_matrices

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RateParams:
    """Incoherent rates in 1/ns."""

    gamma_radical: float = 0.0
    gamma_triplet: float = 0.0
    k_st: float = 0.0
    k_tg: float = 0.0
    k_eg: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = float(getattr(self, f.name))
            if not math.isfinite(value) or value < 0:
                raise InvalidParameterError(f.name, value, "rate must be finite and >= 0")
            object.__setattr__(self, f.name, value)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class JumpSet:
    """Jump operators of one channel sharing a single rate."""

    operators: Tuple[np.ndarray, ...]
    rate: float
    label: int
    name: str

    def __len__(self) -> int:
        return len(self.operators)


def _jump_set(ops: Sequence[np.ndarray], rate: float, label: int, name: str) -> JumpSet:
    expected = EXPECTED_JUMP_COUNTS.get(name)
    if expected is not None and len(ops) != expected:
        raise BasisError(
            f"Channel {name} built {len(ops)} operators, expected {expected}",
            details={"channel": name, "count": len(ops)}
        )
    frozen = []
    for op in ops:
        op = np.asarray(op, dtype=complex)
        op.setflags(write=False)
        frozen.append(op)
    return JumpSet(tuple(frozen), float(rate), label, name)


def radical_jump_ops(which: str, rate: float = 1.0) -> JumpSet:
    """s-, s+, sz of one radical across all three manifolds."""
    if which not in (SLOT_RADICAL1, SLOT_RADICAL2):
        raise BasisError(f"Not a radical slot: {which}", details={"slot": which})
    half = spin_matrices(0.5)
    ops = [embed(op, which) for op in (half.minus, half.plus, half.sz)]
    return _jump_set(ops, rate, CHANNEL_RADICAL, which)


def triplet_jump_ops(rate: float = 1.0) -> JumpSet:
    """Gell-Mann matrices on the coupler spin, supported on T1 only."""
    ops = [embed(lam, SLOT_COUPLER, MANIFOLD_T1) for lam in gell_mann_matrices()]
    return _jump_set(ops, rate, CHANNEL_TRIPLET, "triplet")


def _spin_conserving_pairs(source: str, target: str):
    """(target, source) coupled-state pairs with equal S_total and Sz_total, S <= 1."""
    system = get_spin_system()
    pairs = []
    for src in system.coupled(source):
        if src.S_total > 1:
            continue
        for dst in system.coupled(target):
            if dst.S_total == src.S_total and dst.Sz_total == src.Sz_total:
                pairs.append((dst, src))
    return pairs


def isc_ops(rate: float = 1.0) -> JumpSet:
    """
    |S, m>_T1 <S, m|_S1 for S = 0 and both T1 S = 1 multiplets.

    Every operator carries the same rate.
    """
    ops = [transition(dst.amplitudes, src.amplitudes)
           for dst, src in _spin_conserving_pairs(MANIFOLD_S1, MANIFOLD_T1)]
    return _jump_set(ops, rate, CHANNEL_ISC, "isc")


def triplet_decay_ops(rate: float = 1.0) -> JumpSet:
    """|S, m>_S0 <S, m|_T1 for the T1 S = 0, 1 states; the S = 2 multiplet cannot decay."""
    ops = [transition(dst.amplitudes, src.amplitudes)
           for dst, src in _spin_conserving_pairs(MANIFOLD_T1, MANIFOLD_S0)]
    return _jump_set(ops, rate, CHANNEL_TRIPLET_DECAY, "triplet_decay")


def fluorescence_ops(rate: float = 1.0) -> JumpSet:
    ops = [transition(dst.amplitudes, src.amplitudes)
           for dst, src in _spin_conserving_pairs(MANIFOLD_S1, MANIFOLD_S0)]
    return _jump_set(ops, rate, CHANNEL_FLUORESCENCE, "fluorescence")


def all_jump_sets(rates: RateParams) -> List[JumpSet]:
    """The six jump sets (two radicals, triplet, ISC, triplet decay, fluorescence)."""
    return [
        radical_jump_ops(SLOT_RADICAL1, rates.gamma_radical),
        radical_jump_ops(SLOT_RADICAL2, rates.gamma_radical),
        triplet_jump_ops(rates.gamma_triplet),
        isc_ops(rates.k_st),
        triplet_decay_ops(rates.k_tg),
        fluorescence_ops(rates.k_eg),
    ]


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Column-stack a square matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatchError(rho.shape, (HILBERT_DIM, HILBERT_DIM))
    return rho.reshape(-1, order="F")


def devectorize(vec: np.ndarray, dim: Optional[int] = None) -> np.ndarray:
    """Inverse of `vectorize`."""
    vec = np.asarray(vec)
    n = int(round(math.sqrt(vec.size)))
    if vec.ndim != 1 or n * n != vec.size or (dim is not None and n != dim):
        expected = (dim or n) ** 2
        raise DimensionMismatchError(vec.shape, (expected,))
    return vec.reshape((n, n), order="F")


def commutator_superop(ham: np.ndarray) -> np.ndarray:
    """-i[H, .] as a column-stacking superoperator: -i (I (x) H - H^T (x) I)."""
    eye = np.eye(ham.shape[0])
    return -1j * (np.kron(eye, ham) - np.kron(ham.T, eye))


def lindblad_superop(jump_set: JumpSet) -> np.ndarray:
    """
    rate * sum_mu [ l rho l^dag - 1/2 {l^dag l, rho} ] as a superoperator.

    With this normalisation a population drained by a single lowering operator decays as
    exp(-rate * t).
    """
    ops = jump_set.operators
    dim = ops[0].shape[0] if ops else HILBERT_DIM
    superop = np.zeros((dim * dim, dim * dim), dtype=complex)
    if jump_set.rate == 0.0 or not ops:
        return superop
    eye = np.eye(dim)
    for op in ops:
        gain = op.conj().T @ op
        superop += np.kron(op.conj(), op)
        superop -= 0.5 * (np.kron(eye, gain) + np.kron(gain.T, eye))
    return jump_set.rate * superop


def liouvillian_matrix(ham: np.ndarray, jump_sets: Iterable[JumpSet]) -> np.ndarray:
    """Coherent part plus every dissipator; works for any Hilbert dimension."""
    matrix = commutator_superop(np.asarray(ham, dtype=complex))
    for jump_set in jump_sets:
        if jump_set.rate:
            matrix = matrix + lindblad_superop(jump_set)
    return matrix


@lru_cache(maxsize=32)
def dissipator(rates: RateParams) -> np.ndarray:
    """Sum of the five dissipators; orientation independent, so cached per rate set."""
    total = np.zeros((HILBERT_DIM ** 2, HILBERT_DIM ** 2), dtype=complex)
    for jump_set in all_jump_sets(rates):
        if jump_set.rate:
            total += lindblad_superop(jump_set)
    total.setflags(write=False)
    logger.debug(f"Built dissipator for {rates}")
    return total


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Generator d vec(rho)/dt = matrix @ vec(rho) with its provenance."""

    matrix: np.ndarray
    params: ModelParams
    rates: RateParams
    orientation: Orientation
    time: float

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return devectorize(self.matrix @ vectorize(rho))


def build_liouvillian(params: ModelParams, rates: RateParams, orient: Orientation,
                      t: float = 0.0) -> Liouvillian:
    """
    Total Liouvillian at one orientation and time.

    Args:
        params: Model parameters
        rates: Incoherent rates
        orient: Field orientation
        t: Time in ns; selects whether the optical drive is on

    Returns:
        Liouvillian with a 400x400 matrix
    """
    matrix = commutator_superop(h_total(params, orient, t)) + dissipator(rates)
    return Liouvillian(matrix, params, rates, orient, float(t))
