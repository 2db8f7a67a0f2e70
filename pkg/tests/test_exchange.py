"""
Tests for exchange-coupling extraction from configuration energies.
"""

import math
from pathlib import Path

import pytest

from mrts.core.constants import AFM, FM
from mrts.core.exceptions import (
    ConfigFileNotFoundError,
    DuplicateAngleError,
    EnergyTableParseError,
    MissingEnergyLabelError,
    UnitMismatchError,
)
from mrts.core.units import Quantity, convert_energy
from mrts.services.exchange_service import (
    EnergyTable,
    ExchangeService,
    classify,
    extract_couplings,
    j0_from_energies,
    j123_from_energies,
    j_symmetric,
    load_energy_tables,
    parse_energy_scan,
    parse_energy_table,
    scan_process,
)

ENERGY_DIR = Path(__file__).resolve().parents[1] / "configs" / "energies"


def table(angle=None, unit="K", **energies):
    return EnergyTable({k: Quantity(v, unit) for k, v in energies.items()}, angle)


class TestFormulas:
    """Test suite for the closed-form coupling expressions."""

    def test_j0(self):
        j0 = j0_from_energies(Quantity(8.4, "K"), Quantity(0.0, "K"))
        assert j0.value == pytest.approx(16.8)
        assert j0.unit == "K"

    def test_j0_rejects_mixed_units(self):
        with pytest.raises(UnitMismatchError):
            j0_from_energies(Quantity(8.4, "K"), Quantity(0.0, "eV"))

    def test_general_formulas(self):
        result = j123_from_energies(table(a=1.0, b=4.0, c=10.0, d=2.0))
        assert result.J1 == pytest.approx(((1.0 - 10.0) + (4.0 - 2.0)) / 2)
        assert result.J2 == pytest.approx(((1.0 - 10.0) - (4.0 - 2.0)) / 2)
        assert result.J3 == pytest.approx((10.0 - 2.0) + (1.0 - 4.0))
        assert result.J0 is None
        assert result.j3_negligible is None

    def test_symmetric_reduces_to_general(self):
        j1, j3 = j_symmetric(Quantity(0.0, "K"), Quantity(22.8, "K"), Quantity(45.6, "K"))
        general = j123_from_energies(table(a=0.0, b=22.8, c=45.6, d=22.8))
        assert j1.value == pytest.approx(general.J1)
        assert general.J2 == pytest.approx(general.J1)
        assert j3.value == pytest.approx(general.J3)

    def test_worked_example(self):
        result = j123_from_energies(table(a=0.0, b=1.0, c=2.0, d=1.0))
        assert (result.J1, result.J2, result.J3) == (-1.0, -1.0, 0.0)

    def test_swapping_b_and_d_swaps_j1_and_j2(self):
        forward = j123_from_energies(table(a=0.0, b=3.0, c=2.0, d=0.5))
        swapped = j123_from_energies(table(a=0.0, b=0.5, c=2.0, d=3.0))
        assert (forward.J1, forward.J2, forward.J3) == (0.25, -2.25, -1.5)
        assert (swapped.J1, swapped.J2, swapped.J3) == (-2.25, 0.25, -1.5)

    def test_constant_energy_shift_is_irrelevant(self):
        energies = {"a": 0.0, "b": 3.0, "c": 2.0, "d": 0.5, "triplet": 1.25,
                    "broken_symmetry": 0.75}
        base = j123_from_energies(table(**energies))
        shifted = j123_from_energies(table(**{k: v + 7.25 for k, v in energies.items()}))
        assert (shifted.J0, shifted.J1, shifted.J2, shifted.J3) == (
            base.J0, base.J1, base.J2, base.J3)

    def test_extraction_commutes_with_unit_conversion(self):
        energies = {"a": 0.0, "b": 461.4, "c": 922.8, "d": 455.0, "triplet": 8.4,
                    "broken_symmetry": 0.0}
        in_kelvin = j123_from_energies(table(**energies))
        in_wavenumbers = j123_from_energies(table(unit="cm-1", **{
            k: convert_energy(v, "K", "cm-1") for k, v in energies.items()}))
        converted = in_kelvin.to("cm-1")
        back = converted.to("K")
        for name in ("J0", "J1", "J2", "J3"):
            assert getattr(converted, name) == pytest.approx(getattr(in_wavenumbers, name),
                                                             rel=1e-12)
            assert getattr(back, name) == pytest.approx(getattr(in_kelvin, name), rel=1e-12)

    def test_classification(self):
        assert classify(16.8) == AFM
        assert classify(-461.4) == FM

    def test_mixed_units_converted_explicitly(self):
        mixed = EnergyTable({
            "a": Quantity(0.0, "K"),
            "b": Quantity(1.0, "cm-1"),
            "c": Quantity(2.0, "cm-1"),
            "d": Quantity(1.0, "cm-1"),
        })
        result = j123_from_energies(mixed)
        assert result.unit == "K"
        assert result.J1 == pytest.approx(-convert_energy(1.0, "cm-1", "K"))

    def test_missing_label(self):
        with pytest.raises(MissingEnergyLabelError, match="label: d"):
            j123_from_energies(table(a=0.0, b=1.0, c=2.0))

    def test_j0_only_table(self):
        result = extract_couplings(table(triplet=7.6, broken_symmetry=0.0))
        assert result.J0 == pytest.approx(15.2)
        assert result.J1 is None


class TestGoldenTables:
    """Test suite for the bundled dihedral tables."""

    def setup_method(self):
        paths = sorted(ENERGY_DIR.glob("dihedral_*.txt"))
        self.scan = scan_process(load_energy_tables(paths), unit="K")
        self.by_angle = {r.angle: r for r in self.scan.results}

    def test_planar(self):
        result = self.by_angle[0.0]
        assert result.J0 == pytest.approx(16.8, rel=1e-12)
        assert result.J1 == pytest.approx(-461.4, rel=1e-12)
        assert result.J2 == pytest.approx(-461.4, rel=1e-12)
        assert result.J3 == pytest.approx(0.0, abs=1e-12)
        assert result.classification == {"J0": AFM, "J1": FM, "J2": FM, "J3": "none"}
        assert result.j3_negligible is True

    def test_sixty_degrees(self):
        result = self.by_angle[60.0]
        assert result.J0 == pytest.approx(15.2, rel=1e-12)
        assert result.J1 == pytest.approx(-22.8, rel=1e-12)

    def test_perpendicular(self):
        result = self.by_angle[90.0]
        assert result.J1 == pytest.approx(-2.0, rel=1e-12)
        assert result.J0 is None

    def test_scan_is_sorted_and_monotonic(self):
        assert [r.angle for r in self.scan.results] == [0.0, 60.0, 90.0]
        assert self.scan.j1_monotonic is True
        assert self.scan.warnings == []

    def test_frame(self):
        frame = self.scan.to_frame()
        assert list(frame["angle_deg"]) == [0.0, 60.0, 90.0]
        assert math.isnan(frame.loc[2, "J0"])
        assert frame.loc[0, "J3_negligible"] == "true"

    def test_unit_conversion(self):
        scan = scan_process(load_energy_tables([ENERGY_DIR / "dihedral_000.txt"]), unit="cm-1")
        assert scan.results[0].unit == "cm-1"
        assert scan.results[0].J1 == pytest.approx(convert_energy(-461.4, "K", "cm-1"), rel=1e-12)


class TestParsing:
    """Test suite for energy-table parsing."""

    def test_directives_and_aliases(self):
        parsed = parse_energy_table("@angle 30\n@molecule X Y\nT 1.0 K\nbs 0.5 K  # note\n")
        assert parsed.angle == 30.0
        assert parsed.molecule == "X Y"
        assert parsed.has("triplet", "broken_symmetry")

    def test_error_reports_line_number(self):
        with pytest.raises(EnergyTableParseError, match=r"mem:3: value is not a number") as info:
            parse_energy_table("# header\na 0.0 K\nb abc K\n", "mem")
        assert info.value.details["line_number"] == 3

    def test_unknown_label(self):
        with pytest.raises(EnergyTableParseError, match="unknown label"):
            parse_energy_table("quartet 1.0 K\n")

    def test_unknown_unit(self):
        with pytest.raises(EnergyTableParseError, match="Unknown energy unit"):
            parse_energy_table("a 1.0 furlongs\n")

    def test_repeated_label(self):
        with pytest.raises(EnergyTableParseError, match="repeated"):
            parse_energy_table("a 1.0 K\na 2.0 K\n")

    def test_scan_layout(self, tmp_path):
        path = tmp_path / "scan.txt"
        path.write_text(
            "# dihedral scan\n"
            "angle a b c d triplet broken_symmetry unit\n"
            "90 0 2.0 4.0 2.0 nan nan K\n"
            "0 0 461.4 922.8 461.4 8.4 0 K\n"
        )
        tables = load_energy_tables([path])
        assert len(tables) == 2
        scan = scan_process(tables)
        assert [r.angle for r in scan.results] == [0.0, 90.0]
        assert scan.results[0].J0 == pytest.approx(16.8)
        assert scan.results[1].J0 is None

    def test_scan_missing_column(self, tmp_path):
        path = tmp_path / "scan.txt"
        path.write_text("angle a b c d\n0 0 1 2 1\n")
        with pytest.raises(EnergyTableParseError, match="unit"):
            parse_energy_scan(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigFileNotFoundError):
            load_energy_tables([tmp_path / "absent.txt"])


class TestScanProcess:
    """Test suite for dihedral scans."""

    def test_duplicate_angle(self):
        tables = [table(0.0, a=0, b=1, c=2, d=1), table(0.0, a=0, b=2, c=4, d=2)]
        with pytest.raises(DuplicateAngleError, match="0 deg"):
            scan_process(tables)

    def test_non_monotonic_warns(self):
        tables = [table(0.0, a=0, b=1, c=2, d=1), table(90.0, a=0, b=5, c=10, d=5)]
        scan = scan_process(tables)
        assert scan.j1_monotonic is False
        assert any("monotonically" in w for w in scan.warnings)

    def test_large_j3_warns(self):
        tables = [table(0.0, a=0, b=1, c=5, d=1, triplet=1.0, broken_symmetry=0.0)]
        scan = scan_process(tables)
        assert scan.results[0].j3_negligible is False
        assert any("not negligible" in w for w in scan.warnings)


class TestExchangeService:
    """Test suite for the exchange service result dicts."""

    def test_process_files(self):
        service = ExchangeService("K")
        result = service.process_files([ENERGY_DIR / "dihedral_000.txt"])
        assert result["success"] is True
        assert result["scan"].results[0].J1 == pytest.approx(-461.4)

    def test_missing_file_is_error_dict(self, tmp_path):
        result = ExchangeService().process_files([tmp_path / "nope.txt"])
        assert result["success"] is False
        assert result["error_code"] == "ConfigFileNotFoundError"

    def test_parse_error_is_error_dict(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("a 1.0\n")
        result = ExchangeService().process_files([path])
        assert result["success"] is False
        assert result["error_code"] == "EnergyTableParseError"
