"""
Exchange service: couplings J0..J3 from total energies of spin configurations.

Energy tables come in two text layouts:

    single table            # comments allowed
                            @angle 60
                            @molecule TYY-DPA-TYY
                            a  -2071.123456  Hartree
                            triplet  8.4  K

    dihedral scan           angle  a  b  c  d  triplet  broken_symmetry  unit
                            0      0  461.4  922.8  461.4  8.4  0  K
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import pandas as pd

from ..core.constants import (
    ENERGY_LABELS,
    J3_NEGLIGIBLE_RATIO,
    AFM,
    FM,
    ZERO_COUPLING,
)
from ..core.exceptions import (
    ConfigFileNotFoundError,
    DuplicateAngleError,
    EnergyTableParseError,
    MissingEnergyLabelError,
    UnitError,
    UnitMismatchError,
    MRTSError,
    handle_exchange_exception,
)
from ..core.units import Quantity, normalize_energy_unit

logger = logging.getLogger(__name__)

LABEL_ALIASES = {"bs": "broken_symmetry", "broken-symmetry": "broken_symmetry", "t": "triplet"}


def classify(value: float) -> str:
    """AFM for J > 0, FM for J < 0."""
    if value > 0:
        return AFM
    if value < 0:
        return FM
    return ZERO_COUPLING


def _same_unit(*energies: Quantity) -> str:
    units = {q.unit for q in energies}
    if len(units) != 1:
        raise UnitMismatchError(sorted(units))
    return units.pop()


def j0_from_energies(e_triplet: Quantity, e_bs: Quantity) -> Quantity:
    """J0 = 2 (E_triplet - E_BS)."""
    unit = _same_unit(e_triplet, e_bs)
    return Quantity(2.0 * (e_triplet.value - e_bs.value), unit)


def j_symmetric(e_a: Quantity, e_b: Quantity, e_c: Quantity) -> Tuple[Quantity, Quantity]:
    """Symmetric molecule (E_b = E_d): J1 = J2 = dE_ac / 2, J3 = dE_cb + dE_ab."""
    unit = _same_unit(e_a, e_b, e_c)
    j1 = (e_a.value - e_c.value) / 2.0
    j3 = (e_c.value - e_b.value) + (e_a.value - e_b.value)
    return Quantity(j1, unit), Quantity(j3, unit)


@dataclass(frozen=True, eq=False)
class EnergyTable:
    """Total energies of labelled spin configurations, each with its own unit."""

    entries: Mapping[str, Quantity]
    angle: Optional[float] = None
    molecule: Optional[str] = None
    source: str = "<memory>"

    def has(self, *labels: str) -> bool:
        return all(label in self.entries for label in labels)

    def energy(self, label: str) -> Quantity:
        if label not in self.entries:
            raise MissingEnergyLabelError(label, self.source)
        return self.entries[label]

    def energies_in(self, labels: Sequence[str], unit: Optional[str] = None) -> List[Quantity]:
        """Requested energies converted to one unit (the first entry's by default)."""
        values = [self.energy(label) for label in labels]
        unit = normalize_energy_unit(unit) if unit else values[0].unit
        return [q if q.unit == unit else q.to(unit) for q in values]

    def converted(self, unit: str) -> "EnergyTable":
        return EnergyTable(
            {label: q.to(unit) for label, q in self.entries.items()},
            self.angle, self.molecule, self.source
        )


@dataclass(frozen=True)
class ExchangeResult:
    """Couplings in one unit; J0 or J1..J3 are None when their labels are absent."""

    unit: str
    J0: Optional[float] = None
    J1: Optional[float] = None
    J2: Optional[float] = None
    J3: Optional[float] = None
    angle: Optional[float] = None
    j3_negligible: Optional[bool] = None

    @property
    def classification(self) -> Dict[str, str]:
        return {
            name: classify(value)
            for name, value in (("J0", self.J0), ("J1", self.J1), ("J2", self.J2), ("J3", self.J3))
            if value is not None
        }

    def to(self, unit: str) -> "ExchangeResult":
        def convert(value):
            return None if value is None else Quantity(value, self.unit).to(unit).value
        return ExchangeResult(normalize_energy_unit(unit), convert(self.J0), convert(self.J1),
                              convert(self.J2), convert(self.J3), self.angle, self.j3_negligible)

    def to_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {"angle_deg": self.angle}
        classes = self.classification
        for name in ("J0", "J1", "J2", "J3"):
            value = getattr(self, name)
            row[name] = np.nan if value is None else value
            row[f"{name}_class"] = classes.get(name, "")
        row["J3_negligible"] = "" if self.j3_negligible is None else str(self.j3_negligible).lower()
        return row


def j123_from_energies(table: EnergyTable, unit: Optional[str] = None,
                       j3_ratio: float = J3_NEGLIGIBLE_RATIO) -> ExchangeResult:
    """
    J1 = (dE_ac + dE_bd)/2, J2 = (dE_ac - dE_bd)/2, J3 = dE_cd + dE_ab with dE_ij = E_i - E_j.

    J0 is added when the table also holds triplet and broken_symmetry energies.
    Mixed units are converted explicitly to `unit` (default: the unit of 'a').
    """
    e_a, e_b, e_c, e_d = table.energies_in(("a", "b", "c", "d"), unit)
    unit = e_a.unit
    de_ac = e_a.value - e_c.value
    de_bd = e_b.value - e_d.value
    j1 = (de_ac + de_bd) / 2.0
    j2 = (de_ac - de_bd) / 2.0
    j3 = (e_c.value - e_d.value) + (e_a.value - e_b.value)

    j0 = None
    if table.has("triplet", "broken_symmetry"):
        e_t, e_bs = table.energies_in(("triplet", "broken_symmetry"), unit)
        j0 = j0_from_energies(e_t, e_bs).value
    return ExchangeResult(unit, j0, j1, j2, j3, table.angle, _j3_flag(j0, j3, j3_ratio))


def extract_couplings(table: EnergyTable, unit: Optional[str] = None,
                      j3_ratio: float = J3_NEGLIGIBLE_RATIO) -> ExchangeResult:
    """Whatever the table supports: J0 from triplet/BS, J1..J3 from a..d."""
    if table.has("a", "b", "c", "d"):
        return j123_from_energies(table, unit, j3_ratio)
    e_t, e_bs = table.energies_in(("triplet", "broken_symmetry"), unit)
    return ExchangeResult(e_t.unit, J0=j0_from_energies(e_t, e_bs).value, angle=table.angle)


def _j3_flag(j0: Optional[float], j3: float, ratio: float) -> Optional[bool]:
    if j0 is None:
        return None
    return abs(j3) < ratio * abs(j0)


# === PARSING ===

def _canonical_label(raw: str) -> str:
    label = raw.strip().lower()
    return LABEL_ALIASES.get(label, label)


def parse_energy_table(text: str, source: str = "<string>") -> EnergyTable:
    """Parse the single-table layout (`label value unit` per line)."""
    entries: Dict[str, Quantity] = {}
    angle: Optional[float] = None
    molecule: Optional[str] = None
    for number, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if parts[0].startswith("@"):
            key = parts[0][1:].lower()
            if key == "angle" and len(parts) == 2:
                try:
                    angle = float(parts[1])
                except ValueError:
                    raise EnergyTableParseError(source, number, line, "angle is not a number")
            elif key == "molecule" and len(parts) >= 2:
                molecule = " ".join(parts[1:])
            else:
                raise EnergyTableParseError(source, number, line, f"unknown directive @{key}")
            continue
        if len(parts) != 3:
            raise EnergyTableParseError(source, number, line, "expected 'label value unit'")
        label = _canonical_label(parts[0])
        if label not in ENERGY_LABELS:
            raise EnergyTableParseError(source, number, line, f"unknown label '{parts[0]}'")
        if label in entries:
            raise EnergyTableParseError(source, number, line, f"label '{label}' repeated")
        try:
            entries[label] = Quantity(float(parts[1]), parts[2])
        except ValueError:
            raise EnergyTableParseError(source, number, line, "value is not a number")
        except UnitError as e:
            raise EnergyTableParseError(source, number, line, e.message)
    return EnergyTable(entries, angle, molecule, source)


def parse_energy_scan(path: Union[str, Path]) -> List[EnergyTable]:
    """Parse the dihedral-scan layout: one row per angle, energies sharing the row unit."""
    path = Path(path)
    if not path.is_file():
        raise ConfigFileNotFoundError(str(path))
    try:
        frame = pd.read_csv(path, sep=r"\s+", comment="#", dtype={"unit": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise EnergyTableParseError(str(path), 0, "", f"unreadable scan table: {e}")

    frame.columns = [_canonical_label(c) for c in frame.columns]
    for required in ("angle", "unit"):
        if required not in frame.columns:
            raise EnergyTableParseError(str(path), 1, " ".join(frame.columns), f"missing column '{required}'")
    labels = [c for c in frame.columns if c in ENERGY_LABELS]
    unknown = [c for c in frame.columns if c not in ENERGY_LABELS and c not in ("angle", "unit")]
    if unknown:
        raise EnergyTableParseError(str(path), 1, " ".join(frame.columns), f"unknown columns {unknown}")

    tables = []
    for row_number, row in enumerate(frame.itertuples(index=False), start=2):
        record = row._asdict()
        try:
            entries = {label: Quantity(float(record[label]), record["unit"]) for label in labels
                       if not pd.isna(record[label])}
            angle = float(record["angle"])
        except (ValueError, TypeError, UnitError) as e:
            raise EnergyTableParseError(str(path), row_number, str(tuple(row)), str(e))
        tables.append(EnergyTable(entries, angle, None, f"{path}:{row_number}"))
    return tables


def load_energy_tables(paths: Sequence[Union[str, Path]]) -> List[EnergyTable]:
    """Load single tables or scan files; a file whose first data line starts with 'angle' is a scan."""
    tables: List[EnergyTable] = []
    for path in paths:
        path = Path(path)
        if not path.is_file():
            raise ConfigFileNotFoundError(str(path))
        text = path.read_text()
        first = next((line.split()[0].lower() for line in text.splitlines()
                      if line.strip() and not line.strip().startswith("#")), "")
        if first == "angle":
            tables.extend(parse_energy_scan(path))
        else:
            tables.append(parse_energy_table(text, str(path)))
    return tables


# === SCANS ===

@dataclass(frozen=True, eq=False)
class ScanResult:
    """One ExchangeResult per angle, sorted by angle."""

    results: List[ExchangeResult]
    unit: str
    j1_monotonic: Optional[bool] = None
    warnings: List[str] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([result.to_row() for result in self.results])


def _monotonic_decreasing_abs(values: Sequence[float]) -> bool:
    magnitudes = np.abs(np.asarray(values, dtype=float))
    return bool(np.all(np.diff(magnitudes) <= 0))


def scan_process(tables: Sequence[EnergyTable], unit: str = "K",
                 j3_ratio: float = J3_NEGLIGIBLE_RATIO) -> ScanResult:
    """
    Extract couplings for every table of a dihedral scan.

    Raises:
        DuplicateAngleError: two tables share an angle
    """
    unit = normalize_energy_unit(unit)
    seen = set()
    for table in tables:
        if table.angle is None:
            continue
        if table.angle in seen:
            raise DuplicateAngleError(table.angle)
        seen.add(table.angle)

    ordered = sorted(tables, key=lambda tb: (tb.angle is None, tb.angle if tb.angle is not None else 0.0))
    results = [extract_couplings(table, unit, j3_ratio).to(unit) for table in ordered]

    warnings: List[str] = []
    for result in results:
        if result.j3_negligible is False:
            message = f"J3={result.J3:.6g} {unit} is not negligible against J0 at angle {result.angle}"
            warnings.append(message)
            logger.warning(message)

    j1_series = [r.J1 for r in results if r.J1 is not None and r.angle is not None]
    monotonic = _monotonic_decreasing_abs(j1_series) if len(j1_series) > 1 else None
    if monotonic is False:
        message = "|J1| does not decrease monotonically with dihedral angle"
        warnings.append(message)
        logger.warning(message)
    return ScanResult(results, unit, monotonic, warnings)


class ExchangeService:
    """Loads energy tables and reports couplings as result dicts."""

    def __init__(self, unit: str = "K", j3_ratio: float = J3_NEGLIGIBLE_RATIO):
        self.unit = normalize_energy_unit(unit)
        self.j3_ratio = j3_ratio

    def process_files(self, paths: Sequence[Union[str, Path]]) -> Dict[str, Any]:
        """
        Extract couplings from energy-table files.

        Returns:
            Dict with success status and the ScanResult
        """
        try:
            tables = load_energy_tables(paths)
            scan = scan_process(tables, self.unit, self.j3_ratio)
            logger.info(f"Extracted couplings for {len(scan.results)} table(s) in {self.unit}")
            return {"success": True, "scan": scan}
        except MRTSError as e:
            logger.error(f"Exchange extraction failed: {e.message}")
            return e.to_dict()
        except Exception as e:
            logger.error(f"Exchange extraction failed: {e}")
            return handle_exchange_exception(e)


_exchange_service: Optional[ExchangeService] = None


def initialize_exchange_service(unit: str = "K", j3_ratio: float = J3_NEGLIGIBLE_RATIO) -> ExchangeService:
    """Initialize the global exchange service instance."""
    global _exchange_service
    _exchange_service = ExchangeService(unit, j3_ratio)
    return _exchange_service


def get_exchange_service() -> ExchangeService:
    """Get the global exchange service instance, creating it on first use."""
    global _exchange_service
    if _exchange_service is None:
        _exchange_service = ExchangeService()
    return _exchange_service


def reset_exchange_service() -> None:
    """Reset the global exchange service instance (for testing)."""
    global _exchange_service
    _exchange_service = None
