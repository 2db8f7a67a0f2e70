"""
Composite 20-dimensional basis: two spin-1/2 radicals in three electronic manifolds.

Global ordering (fixed for every module):
    S0 block  indices 0..3    radical1 (x) radical2
    S1 block  indices 4..7    radical1 (x) radical2
    T1 block  indices 8..19   radical1 (x) radical2 (x) coupler
Every factor runs over descending projections (up before down, +1 before 0 before -1),
so the radical configurations are |uu>, |ud>, |du>, |dd> in every block.

T1 coupled states couple radical1 with radical2 first (intermediate spin s12), then
with the coupler spin-1.
"""

import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from .constants import (
    RADICAL_DIM,
    COUPLER_DIM,
    SINGLET_BLOCK_DIM,
    TRIPLET_BLOCK_DIM,
    HILBERT_DIM,
    MANIFOLD_S0,
    MANIFOLD_S1,
    MANIFOLD_T1,
    MANIFOLDS,
    SLOT_RADICAL1,
    SLOT_RADICAL2,
    SLOT_COUPLER,
    SLOTS,
    COUPLED_STATE_TOL,
)
from .exceptions import (
    DimensionMismatchError,
    SlotManifoldError,
    UnknownManifoldError,
    UnknownStateLabelError,
    BasisError,
)
from .spin import SpinOps, spin_matrices, clebsch_gordan

logger = logging.getLogger(__name__)

RADICAL_CONFIGS = ("uu", "ud", "du", "dd")

# named T1 product states, written radical1 / coupler / radical2
NAMED_STATES = {"a": "u+u", "b": "u+d", "c": "d+d", "d": "d+u"}

ManifoldSpec = Union[str, Iterable[str], None]


@dataclass(frozen=True)
class BasisState:
    """One product basis vector of the composite space."""

    index: int
    manifold: str
    m_radical1: float
    m_radical2: float
    m_coupler: Optional[int] = None

    @property
    def radical_config(self) -> str:
        return ("u" if self.m_radical1 > 0 else "d") + ("u" if self.m_radical2 > 0 else "d")

    @property
    def label(self) -> str:
        if self.m_coupler is None:
            return f"{self.manifold}:{self.radical_config}"
        coupler = {1: "+", 0: "0", -1: "-"}[self.m_coupler]
        return f"{self.manifold}:{self.radical_config[0]}{coupler}{self.radical_config[1]}"


class CompositeBasis:
    """Block layout and product-state table of the 20-dim space."""

    def __init__(self):
        self.dims: Dict[str, int] = {
            MANIFOLD_S0: SINGLET_BLOCK_DIM,
            MANIFOLD_S1: SINGLET_BLOCK_DIM,
            MANIFOLD_T1: TRIPLET_BLOCK_DIM,
        }
        self.offsets: Dict[str, int] = {}
        offset = 0
        for name in MANIFOLDS:
            self.offsets[name] = offset
            offset += self.dims[name]
        self.dim = offset

        states: List[BasisState] = []
        for name in MANIFOLDS:
            for r1, r2 in product((0.5, -0.5), repeat=2):
                if name == MANIFOLD_T1:
                    for mc in (1, 0, -1):
                        states.append(BasisState(len(states), name, r1, r2, mc))
                else:
                    states.append(BasisState(len(states), name, r1, r2))
        self.states: Tuple[BasisState, ...] = tuple(states)
        self._by_label = {state.label: state for state in self.states}

    def block(self, manifold: str) -> slice:
        """Index slice of a manifold block."""
        if manifold not in self.dims:
            raise UnknownManifoldError(manifold)
        start = self.offsets[manifold]
        return slice(start, start + self.dims[manifold])

    def projector(self, manifold: str) -> np.ndarray:
        proj = np.zeros((self.dim, self.dim), dtype=complex)
        sl = self.block(manifold)
        proj[sl, sl] = np.eye(self.dims[manifold])
        return proj

    def ket(self, index: int) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=complex)
        vec[index] = 1.0
        return vec

    def product_state(self, label: str) -> BasisState:
        """Look up a product state by its label, e.g. 'S0:ud' or 'T1:u-d'."""
        state = self._by_label.get(label)
        if state is None:
            raise UnknownStateLabelError(label)
        return state

    def radical_index(self, index: int) -> int:
        """Radical configuration (0..3 for uu, ud, du, dd) of a global basis index."""
        return RADICAL_CONFIGS.index(self.states[index].radical_config)


def _manifold_list(manifolds: ManifoldSpec) -> Tuple[str, ...]:
    if manifolds is None:
        return MANIFOLDS
    if isinstance(manifolds, str):
        manifolds = (manifolds,)
    names = tuple(manifolds)
    for name in names:
        if name not in MANIFOLDS:
            raise UnknownManifoldError(name)
    return names


def _block_operator(op: np.ndarray, slot: str, manifold: str) -> np.ndarray:
    eye2 = np.eye(RADICAL_DIM)
    if manifold == MANIFOLD_T1:
        eye3 = np.eye(COUPLER_DIM)
        if slot == SLOT_RADICAL1:
            return np.kron(np.kron(op, eye2), eye3)
        if slot == SLOT_RADICAL2:
            return np.kron(np.kron(eye2, op), eye3)
        return np.kron(np.kron(eye2, eye2), op)
    if slot == SLOT_COUPLER:
        raise SlotManifoldError(slot, manifold)
    if slot == SLOT_RADICAL1:
        return np.kron(op, eye2)
    return np.kron(eye2, op)


def embed(op: np.ndarray, slot: str, manifolds: ManifoldSpec = None,
          basis: Optional[CompositeBasis] = None) -> np.ndarray:
    """
    Embed a single-slot operator into the 20-dim space.

    The operator acts as op (x) identity on the other slots of each listed manifold and
    as zero on every manifold not listed.

    Args:
        op: 2x2 for a radical slot, 3x3 for the coupler
        slot: 'radical1', 'radical2' or 'coupler'
        manifolds: One manifold label, a collection of them, or None for all three
        basis: Layout to embed into (the shared one by default)

    Raises:
        SlotManifoldError: coupler slot requested outside T1
        DimensionMismatchError: op does not match the slot dimension
    """
    if slot not in SLOTS:
        raise BasisError(f"Unknown slot: {slot}", details={"slot": slot})
    op = np.asarray(op)
    expected = COUPLER_DIM if slot == SLOT_COUPLER else RADICAL_DIM
    if op.shape != (expected, expected):
        raise DimensionMismatchError(op.shape, (expected, expected))

    basis = basis or get_spin_system().basis
    full = np.zeros((HILBERT_DIM, HILBERT_DIM), dtype=complex)
    for name in _manifold_list(manifolds):
        sl = basis.block(name)
        full[sl, sl] = _block_operator(op, slot, name)
    return full


def total_spin_ops(basis: Optional[CompositeBasis] = None) -> SpinOps:
    """Total spin s1 + s2 (+ S_coupler in T1) on the 20-dim space."""
    half = spin_matrices(0.5)
    one = spin_matrices(1)
    components = []
    for radical_op, coupler_op in zip(half.as_tuple(), one.as_tuple()):
        total = (
            embed(radical_op, SLOT_RADICAL1, basis=basis)
            + embed(radical_op, SLOT_RADICAL2, basis=basis)
            + embed(coupler_op, SLOT_COUPLER, MANIFOLD_T1, basis=basis)
        )
        total.setflags(write=False)
        components.append(total)
    return SpinOps(*components)


@dataclass(frozen=True, eq=False)
class CoupledState:
    """
    Total-spin eigenstate |S_total, Sz_total> within one manifold.

    `intermediate` is the radical-pair spin s12 the state was built from; `amplitudes`
    is a full 20-vector supported on the manifold block.
    """

    manifold: str
    S_total: float
    Sz_total: float
    intermediate: int
    amplitudes: np.ndarray

    @property
    def label(self) -> str:
        label = f"{self.manifold}:S={_fmt(self.S_total)},M={_fmt(self.Sz_total)}"
        if self.manifold == MANIFOLD_T1:
            label += f",s12={self.intermediate}"
        return label

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{int(round(2 * value))}/2"


def _radical_pair_vector(s12: int, m12: int) -> Dict[Tuple[float, float], float]:
    amps = {}
    for m1, m2 in product((0.5, -0.5), repeat=2):
        coeff = clebsch_gordan(0.5, m1, 0.5, m2, s12, m12)
        if coeff != 0.0:
            amps[(m1, m2)] = coeff
    return amps


def _build_coupled_states(basis: CompositeBasis) -> Dict[str, Tuple[CoupledState, ...]]:
    table: Dict[str, Tuple[CoupledState, ...]] = {}
    for name in (MANIFOLD_S0, MANIFOLD_S1):
        offset = basis.offsets[name]
        states = []
        for s12, m12 in ((0, 0), (1, 1), (1, 0), (1, -1)):
            vec = np.zeros(basis.dim, dtype=complex)
            for (m1, m2), coeff in _radical_pair_vector(s12, m12).items():
                local = (0 if m1 > 0 else 2) + (0 if m2 > 0 else 1)
                vec[offset + local] = coeff
            vec.setflags(write=False)
            states.append(CoupledState(name, float(s12), float(m12), s12, vec))
        table[name] = tuple(states)

    offset = basis.offsets[MANIFOLD_T1]
    # S descending, then s12 descending, then M descending
    multiplets = ((2, 1), (1, 1), (1, 0), (0, 1))
    states = []
    for total, s12 in multiplets:
        for big_m in range(total, -total - 1, -1):
            vec = np.zeros(basis.dim, dtype=complex)
            for m12 in range(-s12, s12 + 1):
                mc = big_m - m12
                if abs(mc) > 1:
                    continue
                outer = clebsch_gordan(s12, m12, 1, mc, total, big_m)
                if outer == 0.0:
                    continue
                for (m1, m2), inner in _radical_pair_vector(s12, m12).items():
                    local = ((0 if m1 > 0 else 2) + (0 if m2 > 0 else 1)) * COUPLER_DIM + (1 - mc)
                    vec[offset + local] += inner * outer
            vec.setflags(write=False)
            states.append(CoupledState(MANIFOLD_T1, float(total), float(big_m), s12, vec))
    table[MANIFOLD_T1] = tuple(states)
    return table


_COUPLED_LABEL = re.compile(
    r"^(?P<manifold>S0|S1|T1):S=(?P<S>\d+),M=(?P<M>[+-]?\d+)(?:,s12=(?P<s12>[01]))?$"
)
_CHAR_LABEL = re.compile(r"^(?P<manifold>S0|S1|T1):(?P<body>[ud][+0-]?[ud])$")
_NUMERIC_LABEL = re.compile(r"^(?P<manifold>S0|S1|T1):\|?(?P<body>[^|>]+)>?$")


class SpinSystem:
    """Shared, read-only bundle of the composite basis and its standard operators."""

    def __init__(self):
        self.basis = CompositeBasis()
        self._coupled: Optional[Dict[str, Tuple[CoupledState, ...]]] = None
        self._total: Optional[SpinOps] = None

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def total_spin(self) -> SpinOps:
        if self._total is None:
            self._total = total_spin_ops(self.basis)
        return self._total

    def coupled(self, manifold: str) -> Tuple[CoupledState, ...]:
        if manifold not in MANIFOLDS:
            raise UnknownManifoldError(manifold)
        if self._coupled is None:
            self._coupled = _build_coupled_states(self.basis)
            logger.debug(f"Built coupled-state tables for {', '.join(MANIFOLDS)}")
        return self._coupled[manifold]

    def find_coupled(self, manifold: str, S_total: float, Sz_total: float,
                     intermediate: Optional[int] = None) -> CoupledState:
        matches = [
            state for state in self.coupled(manifold)
            if state.S_total == S_total and state.Sz_total == Sz_total
            and (intermediate is None or state.intermediate == intermediate)
        ]
        label = f"{manifold}:S={_fmt(S_total)},M={_fmt(Sz_total)}"
        if not matches:
            raise UnknownStateLabelError(label)
        if len(matches) > 1:
            raise UnknownStateLabelError(label, "ambiguous, give s12")
        return matches[0]

    def resolve_state(self, label: str) -> np.ndarray:
        """
        Resolve a state label to a unit 20-vector.

        Accepted forms:
            'a' .. 'd'                   named T1 product states (|u+u>, |u+d>, |d+d>, |d+u>)
            'S0:ud', 'T1:u-d'            product states (T1 order: radical1, coupler, radical2)
            'T1:1/2,1,-1/2'              projections (T1 order: radical1, coupler, radical2)
            'T1:S=1,M=0,s12=0'           coupled states
        """
        text = label.strip()
        if text in NAMED_STATES:
            text = f"{MANIFOLD_T1}:{NAMED_STATES[text]}"

        match = _COUPLED_LABEL.match(text)
        if match:
            s12 = match.group("s12")
            state = self.find_coupled(
                match.group("manifold"),
                float(match.group("S")),
                float(match.group("M")),
                None if s12 is None else int(s12),
            )
            return state.amplitudes.copy()

        match = _CHAR_LABEL.match(text)
        if match:
            manifold, body = match.group("manifold"), match.group("body")
            if (manifold == MANIFOLD_T1) != (len(body) == 3):
                raise UnknownStateLabelError(label, "coupler projection only in T1")
            return self.basis.ket(self.basis.product_state(f"{manifold}:{body}").index)

        match = _NUMERIC_LABEL.match(text)
        if match:
            return self.basis.ket(self._numeric_index(label, match.group("manifold"), match.group("body")))

        raise UnknownStateLabelError(label, "unrecognised label format")

    def _numeric_index(self, label: str, manifold: str, body: str) -> int:
        try:
            values = [float(_parse_fraction(part)) for part in body.split(",")]
        except ValueError:
            raise UnknownStateLabelError(label, "projections must be numbers")
        if manifold == MANIFOLD_T1:
            if len(values) != 3:
                raise UnknownStateLabelError(label, "T1 needs radical1, coupler, radical2")
            m1, mc, m2 = values
        else:
            if len(values) != 2:
                raise UnknownStateLabelError(label, "S0/S1 need radical1, radical2")
            (m1, m2), mc = values, None
        for state in self.basis.states:
            if (state.manifold == manifold and state.m_radical1 == m1
                    and state.m_radical2 == m2 and state.m_coupler == mc):
                return state.index
        raise UnknownStateLabelError(label, "projections out of range")

    def check_coupled_states(self) -> float:
        """Largest S^2 / Sz eigen-residual over all coupled states."""
        ops = self.total_spin
        s2 = ops.squared()
        worst = 0.0
        for manifold in MANIFOLDS:
            for state in self.coupled(manifold):
                v = state.amplitudes
                s = state.S_total
                worst = max(
                    worst,
                    float(np.linalg.norm(s2 @ v - s * (s + 1) * v)),
                    float(np.linalg.norm(ops.sz @ v - state.Sz_total * v)),
                )
        if worst > COUPLED_STATE_TOL:
            logger.warning(f"Coupled-state residual {worst:.3g} exceeds {COUPLED_STATE_TOL:.1g}")
        return worst


def _parse_fraction(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


@lru_cache(maxsize=1)
def get_spin_system() -> SpinSystem:
    """Get the shared spin-system instance."""
    return SpinSystem()


def coupled_states(manifold: str) -> List[CoupledState]:
    """Total-spin eigenstates of one manifold (4 for S0/S1, 12 for T1)."""
    return list(get_spin_system().coupled(manifold))


def resolve_state(label: str) -> np.ndarray:
    return get_spin_system().resolve_state(label)


def transition(ket: np.ndarray, bra: np.ndarray) -> np.ndarray:
    """Rank-one operator |ket><bra| on the 20-dim space."""
    return np.outer(ket, np.conj(bra))


def radical_config_index(config: Union[str, int]) -> int:
    """Index 0..3 of a radical configuration ('uu', 'ud', 'du', 'dd' or 1..4)."""
    if isinstance(config, (int, np.integer)):
        if 1 <= int(config) <= 4:
            return int(config) - 1
        raise UnknownStateLabelError(str(config), "radical index must be 1..4")
    key = str(config).strip().lower()
    if key in RADICAL_CONFIGS:
        return RADICAL_CONFIGS.index(key)
    raise UnknownStateLabelError(str(config), f"expected one of {', '.join(RADICAL_CONFIGS)}")

