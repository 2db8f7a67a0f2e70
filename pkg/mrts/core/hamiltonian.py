"""
Coherent spin Hamiltonian of the radical / coupler / radical molecule.

All energies are in rad/ns; the static field is in mT. ZFS axes are molecule-fixed and
the lab field direction rotates with the orientation.
"""

import logging
import math
from dataclasses import dataclass, field, fields, replace, asdict
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from .constants import (
    MU_B_OVER_HBAR,
    FREE_ELECTRON_G,
    HILBERT_DIM,
    SINGLET_BLOCK_DIM,
    MANIFOLD_S0,
    MANIFOLD_S1,
    MANIFOLD_T1,
)
from .exceptions import InvalidParameterError
from .basis import get_spin_system
from .spin import spin_matrices
from .units import Quantity, parse_field

logger = logging.getLogger(__name__)

ENERGY_FIELDS = ("J0", "J1", "J2", "J3", "D", "E", "V")


@dataclass(frozen=True)
class ModelParams:
    """
    Physical parameters of the coherent model.

    Energies (J0..J3, D, E, V) are rad/ns, B_mag is mT, pulse_window is (t_on, t_off) in ns.
    Use `from_quantities` to build from unit-tagged strings.
    """

    J0: float = 0.0
    J1: float = 0.0
    J2: float = 0.0
    J3: float = 0.0
    D: float = 0.0
    E: float = 0.0
    g_r: float = FREE_ELECTRON_G
    g_c: float = FREE_ELECTRON_G
    B_mag: float = 0.0
    V: float = 0.0
    pulse_window: Tuple[float, float] = field(default=(0.0, 0.0))

    def __post_init__(self):
        for f in fields(self):
            if f.name == "pulse_window":
                continue
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise InvalidParameterError(f.name, value, "must be finite")
        if self.B_mag < 0:
            raise InvalidParameterError("B_mag", self.B_mag, "must be >= 0")
        t_on, t_off = self.pulse_window
        if not (math.isfinite(t_on) and math.isfinite(t_off)):
            raise InvalidParameterError("pulse_window", self.pulse_window, "must be finite")
        if t_on > t_off:
            raise InvalidParameterError("pulse_window", self.pulse_window, "t_on must not exceed t_off")
        object.__setattr__(self, "pulse_window", (float(t_on), float(t_off)))

    @classmethod
    def from_quantities(cls, values: Mapping[str, Any]) -> "ModelParams":
        """
        Build from a mapping whose energy entries are '<value> <unit>' strings or Quantity.

        Bare numbers for energies are taken as rad/ns; B_mag accepts '<value> mT|T'.
        """
        resolved: Dict[str, Any] = {}
        for key, value in values.items():
            if key in ENERGY_FIELDS:
                resolved[key] = _energy(value)
            elif key == "B_mag":
                resolved[key] = parse_field(value)
            elif key == "pulse_window":
                resolved[key] = tuple(float(v) for v in value)
            else:
                resolved[key] = float(value)
        return cls(**resolved)

    def with_updates(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def drive_amplitude(self, t: float) -> float:
        """V(t): V on the half-open window t_on <= t < t_off, else 0."""
        t_on, t_off = self.pulse_window
        return self.V if t_on <= t < t_off else 0.0

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["pulse_window"] = list(self.pulse_window)
        return data


def _energy(value: Union[str, float, Quantity]) -> float:
    if isinstance(value, (int, float)):
        return float(value)
    return Quantity.parse(value).to_internal()


@dataclass(frozen=True)
class Orientation:
    """Static-field direction in the molecular frame (radians)."""

    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise InvalidParameterError("theta", self.theta, "must lie in [0, pi]")
        if not (0.0 <= self.phi < 2.0 * math.pi):
            raise InvalidParameterError("phi", self.phi, "must lie in [0, 2 pi)")

    def static_direction(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    def mw_direction(self) -> np.ndarray:
        """Microwave field direction, always perpendicular to the static field."""
        return np.array([-math.sin(self.phi), math.cos(self.phi), 0.0])


def _zeeman_scale(g: float, params: ModelParams) -> float:
    return g * MU_B_OVER_HBAR * params.B_mag


def _dot(a, b) -> np.ndarray:
    return sum(x @ y for x, y in zip(a, b))


def h_ground(params: ModelParams, orient: Orientation) -> np.ndarray:
    """J0 s1.s2 + g_r mu_B B.(s1 + s2) on the 4-dim radical basis."""
    half = spin_matrices(0.5)
    eye2 = np.eye(2)
    s1 = [np.kron(op, eye2) for op in half.as_tuple()]
    s2 = [np.kron(eye2, op) for op in half.as_tuple()]

    n = orient.static_direction()
    zeeman = _zeeman_scale(params.g_r, params)
    ham = params.J0 * _dot(s1, s2)
    ham = ham + zeeman * sum(n[k] * (s1[k] + s2[k]) for k in range(3))
    return np.asarray(ham, dtype=complex)


def h_triplet(params: ModelParams, orient: Orientation) -> np.ndarray:
    """
    Hamiltonian of the T1 manifold on radical1 (x) radical2 (x) coupler.

    J1 s1.S + J2 S.s2 + J3 s1.s2 + Zeeman (g_r radicals, g_c coupler)
    + D Sz^2 + E (Sx^2 - Sy^2) with ZFS axes fixed to the molecule.
    """
    half = spin_matrices(0.5)
    one = spin_matrices(1)
    eye2, eye3 = np.eye(2), np.eye(3)
    s1 = [np.kron(np.kron(op, eye2), eye3) for op in half.as_tuple()]
    s2 = [np.kron(np.kron(eye2, op), eye3) for op in half.as_tuple()]
    sc = [np.kron(np.kron(eye2, eye2), op) for op in one.as_tuple()]

    n = orient.static_direction()
    ham = params.J1 * _dot(s1, sc) + params.J2 * _dot(sc, s2) + params.J3 * _dot(s1, s2)
    ham = ham + _zeeman_scale(params.g_r, params) * sum(n[k] * (s1[k] + s2[k]) for k in range(3))
    ham = ham + _zeeman_scale(params.g_c, params) * sum(n[k] * sc[k] for k in range(3))
    sx, sy, sz = sc
    ham = ham + params.D * (sz @ sz) + params.E * (sx @ sx - sy @ sy)
    return np.asarray(ham, dtype=complex)


def drive_operator() -> np.ndarray:
    """|S0, r><S1, r| + h.c. summed over the four radical configurations r."""
    basis = get_spin_system().basis
    op = np.zeros((HILBERT_DIM, HILBERT_DIM), dtype=complex)
    s0, s1 = basis.offsets[MANIFOLD_S0], basis.offsets[MANIFOLD_S1]
    for r in range(SINGLET_BLOCK_DIM):
        op[s0 + r, s1 + r] = 1.0
        op[s1 + r, s0 + r] = 1.0
    return op


def h_static(params: ModelParams, orient: Orientation) -> np.ndarray:
    """Block-diagonal part of the Hamiltonian (everything but the optical drive)."""
    basis = get_spin_system().basis
    ham = np.zeros((HILBERT_DIM, HILBERT_DIM), dtype=complex)
    ground = h_ground(params, orient)
    # J0 is unchanged in S1; the electronic gap is left out
    for name, block in ((MANIFOLD_S0, ground), (MANIFOLD_S1, ground),
                        (MANIFOLD_T1, h_triplet(params, orient))):
        sl = basis.block(name)
        ham[sl, sl] = block
    return ham


def h_total(params: ModelParams, orient: Orientation, t: float) -> np.ndarray:
    """
    Full 20x20 Hamiltonian at time t.

    Args:
        params: Model parameters
        orient: Field orientation
        t: Time in ns, gates the drive V(t)

    Returns:
        Hermitian 20x20 matrix in rad/ns
    """
    ham = h_static(params, orient)
    amplitude = params.drive_amplitude(t)
    if amplitude != 0.0:
        ham = ham + amplitude * drive_operator()
    return ham
