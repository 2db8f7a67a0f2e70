"""
Energy and field unit handling.

Every energy-like quantity is resolved to one internal unit, angular frequency in
rad/ns (E / hbar), at construction time. Magnetic fields are kept in mT.
"""

from dataclasses import dataclass
from typing import Dict, Tuple, Union

from .constants import (
    MU_B_OVER_HBAR,
    KB_OVER_HBAR,
    HARTREE_OVER_HBAR,
    EV_OVER_HBAR,
    CM1_OVER_HBAR,
    MHZ_OVER_HBAR,
    GHZ_OVER_HBAR,
    MT_EQUIVALENT_G,
)
from .exceptions import UnitError

INTERNAL_UNIT = "rad/ns"

# factor: value_in_unit * factor = value in rad/ns
ENERGY_UNITS: Dict[str, float] = {
    INTERNAL_UNIT: 1.0,
    "K": KB_OVER_HBAR,
    "mT": MT_EQUIVALENT_G * MU_B_OVER_HBAR,
    "MHz": MHZ_OVER_HBAR,
    "GHz": GHZ_OVER_HBAR,
    "cm-1": CM1_OVER_HBAR,
    "eV": EV_OVER_HBAR,
    "Hartree": HARTREE_OVER_HBAR,
}

_ENERGY_ALIASES = {
    "internal": INTERNAL_UNIT,
    "rad/ns": INTERNAL_UNIT,
    "k": "K",
    "kelvin": "K",
    "mt": "mT",
    "mhz": "MHz",
    "ghz": "GHz",
    "cm-1": "cm-1",
    "cm^-1": "cm-1",
    "1/cm": "cm-1",
    "ev": "eV",
    "hartree": "Hartree",
    "eh": "Hartree",
    "ha": "Hartree",
}

FIELD_UNITS: Dict[str, float] = {"mT": 1.0, "T": 1000.0}
_FIELD_ALIASES = {"mt": "mT", "t": "T", "tesla": "T"}


def normalize_energy_unit(unit: str) -> str:
    """Return the canonical spelling of an energy unit tag."""
    key = unit.strip()
    if key in ENERGY_UNITS:
        return key
    canonical = _ENERGY_ALIASES.get(key.lower())
    if canonical is None:
        raise UnitError(
            f"Unknown energy unit '{unit}'",
            details={"unit": unit, "known": sorted(ENERGY_UNITS)}
        )
    return canonical


def normalize_field_unit(unit: str) -> str:
    """Return the canonical spelling of a magnetic-field unit tag."""
    key = unit.strip()
    if key in FIELD_UNITS:
        return key
    canonical = _FIELD_ALIASES.get(key.lower())
    if canonical is None:
        raise UnitError(
            f"Unknown field unit '{unit}'",
            details={"unit": unit, "known": sorted(FIELD_UNITS)}
        )
    return canonical


def to_internal(value: float, unit: str) -> float:
    """Convert an energy in `unit` to rad/ns."""
    return float(value) * ENERGY_UNITS[normalize_energy_unit(unit)]


def from_internal(value: float, unit: str) -> float:
    """Convert an energy in rad/ns to `unit`."""
    return float(value) / ENERGY_UNITS[normalize_energy_unit(unit)]


def convert_energy(value: float, from_unit: str, to_unit: str) -> float:
    """Convert an energy between two unit tags."""
    source = normalize_energy_unit(from_unit)
    target = normalize_energy_unit(to_unit)
    if source == target:
        return float(value)
    return float(value) * ENERGY_UNITS[source] / ENERGY_UNITS[target]


def field_to_mT(value: float, unit: str) -> float:
    """Convert a magnetic field to mT."""
    return float(value) * FIELD_UNITS[normalize_field_unit(unit)]


def _split_quantity(text: str) -> Tuple[float, str]:
    parts = str(text).strip().split(None, 1)
    if len(parts) != 2:
        raise UnitError(
            f"Quantity '{text}' must be '<value> <unit>'",
            details={"quantity": str(text)}
        )
    try:
        value = float(parts[0])
    except ValueError:
        raise UnitError(
            f"Quantity '{text}' has a non-numeric value",
            details={"quantity": str(text)}
        )
    return value, parts[1].strip()


@dataclass(frozen=True)
class Quantity:
    """An energy value tagged with its unit."""

    value: float
    unit: str

    def __post_init__(self):
        object.__setattr__(self, "unit", normalize_energy_unit(self.unit))

    @classmethod
    def parse(cls, text: Union[str, "Quantity"]) -> "Quantity":
        """Parse '<value> <unit>' (e.g. '-10 mT', '0.0715 cm-1')."""
        if isinstance(text, Quantity):
            return text
        value, unit = _split_quantity(text)
        return cls(value, unit)

    def to_internal(self) -> float:
        return to_internal(self.value, self.unit)

    def to(self, unit: str) -> "Quantity":
        return Quantity(convert_energy(self.value, self.unit, unit), unit)

    def __str__(self) -> str:
        return f"{self.value!r} {self.unit}"


def parse_field(text: Union[str, float]) -> float:
    """Parse a field quantity ('350 mT', '0.35 T') into mT; bare numbers are mT."""
    if isinstance(text, (int, float)):
        return float(text)
    value, unit = _split_quantity(text)
    return field_to_mT(value, unit)
