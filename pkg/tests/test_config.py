"""
Tests for run-configuration loading and validation.
"""

import logging
import os
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from mrts.core.config import (
    RunConfig,
    TimeSection,
    env_log_level,
    load_config,
    parse_config,
    time_grid,
)
from mrts.core.constants import ENV_LOG_LEVEL, ENV_WORKERS
from mrts.core.exceptions import ConfigFileNotFoundError, ConfigSchemaError
from mrts.core.units import to_internal

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.toml"

RATES = {"gamma_radical": 0.1, "gamma_triplet": 0.1, "k_st": 100.0, "k_tg": 0.2, "k_eg": 1.0}


def minimal(**sections):
    data = {"schema_version": 1, "rates": dict(RATES)}
    data.update(sections)
    return data


class TestLoadConfig:
    """Test suite for loading TOML configs."""

    def setup_method(self):
        self.environ = patch.dict(os.environ)
        self.environ.start()
        os.environ.pop(ENV_WORKERS, None)

    def teardown_method(self):
        self.environ.stop()

    def test_default_config(self):
        config = load_config(DEFAULT_CONFIG)
        params = config.model.to_params()
        assert params.J1 == pytest.approx(to_internal(-10.0, "mT"))
        assert params.J2 == params.J1
        assert params.pulse_window == (0.0, 0.005)
        assert config.rates.to_rates().k_st == 100.0
        assert config.orientation.is_powder
        assert config.run.workers == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigFileNotFoundError, match="File not found"):
            load_config(tmp_path / "absent.toml")

    def test_toml_syntax_error(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[model\nJ0 = 1\n")
        with pytest.raises(ConfigSchemaError):
            load_config(path)

    def test_env_overrides_file(self):
        with patch.dict(os.environ, {ENV_WORKERS: "3"}):
            assert load_config(DEFAULT_CONFIG).run.workers == 3

    def test_cli_override_beats_env(self):
        with patch.dict(os.environ, {ENV_WORKERS: "3"}):
            config = load_config(DEFAULT_CONFIG, {"run.workers": 5, "orientation.weighted": None})
        assert config.run.workers == 5
        assert config.orientation.weighted is False

    def test_bad_env_value(self):
        with patch.dict(os.environ, {ENV_WORKERS: "many"}):
            with pytest.raises(ConfigSchemaError, match=ENV_WORKERS):
                load_config(DEFAULT_CONFIG)

    def test_env_log_level(self):
        with patch.dict(os.environ, {ENV_LOG_LEVEL: "debug"}):
            assert env_log_level() == "DEBUG"


class TestSchema:
    """Test suite for schema validation."""

    def test_missing_rates_section(self):
        with pytest.raises(ConfigSchemaError, match="rates") as info:
            parse_config({"schema_version": 1})
        assert any(p.startswith("rates") for p in info.value.details["problems"])

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigSchemaError, match=r"model\.J9"):
            parse_config(minimal(model={"J9": "1 mT"}))

    def test_negative_rate_rejected(self):
        data = minimal()
        data["rates"]["k_tg"] = -1.0
        with pytest.raises(ConfigSchemaError, match=r"rates\.k_tg"):
            parse_config(data)

    def test_bad_quantity(self):
        with pytest.raises(ConfigSchemaError, match="Unknown energy unit"):
            parse_config(minimal(model={"J0": "1 parsec"}))

    def test_inverted_pulse_window(self):
        with pytest.raises(ConfigSchemaError, match="pulse_on"):
            parse_config(minimal(model={"pulse_on": 0.01, "pulse_off": 0.005}))

    def test_pure_state_needs_label(self):
        with pytest.raises(ConfigSchemaError, match="label"):
            parse_config(minimal(initial_state={"kind": "pure"}))

    def test_unsupported_schema_version(self):
        with pytest.raises(ConfigSchemaError, match="schema_version"):
            parse_config({"schema_version": 2, "rates": dict(RATES)})

    def test_explicit_j2(self):
        config = parse_config(minimal(model={"J1": "-10 mT", "J2": "-5 mT"}))
        params = config.model.to_params()
        assert params.J2 == pytest.approx(params.J1 / 2)


class TestScanSection:
    """Test suite for J1 scan values."""

    def test_empty_scan_rejected(self):
        with pytest.raises(ConfigSchemaError, match="must not be empty"):
            parse_config(minimal(scan={"j1_values": []}))

    def test_duplicates_dropped_with_warning(self, caplog):
        config = parse_config(minimal(scan={"j1_values": ["-10 mT", "-1 mT", "-10 mT"]}))
        with caplog.at_level(logging.WARNING):
            values = config.scan.unique_values()
        assert values == pytest.approx([to_internal(-10.0, "mT"), to_internal(-1.0, "mT")])
        assert "Duplicate J1 scan value" in caplog.text


class TestProvenance:
    """Test suite for canonical config lines."""

    def test_execution_policy_excluded(self):
        one = parse_config(minimal(run={"workers": 1}))
        four = parse_config(minimal(run={"workers": 4, "output_dir": "elsewhere"}))
        assert one.canonical_lines() == four.canonical_lines()
        lines = one.canonical_lines()
        assert "run.seed = 0" in lines
        assert not any(line.startswith("run.workers") for line in lines)
        assert lines == sorted(lines)

    def test_model_values_present(self):
        lines = parse_config(minimal(model={"J0": "2 K"})).canonical_lines()
        assert 'model.J0 = "2 K"' in lines

    def test_round_trip_through_model(self):
        config = parse_config(minimal())
        assert isinstance(RunConfig.model_validate(config.model_dump()), RunConfig)


class TestTimeGrid:
    def test_uniform(self):
        grid = time_grid(TimeSection(t_end=2.0, n_points=5))
        np.testing.assert_allclose(grid, [0.0, 0.5, 1.0, 1.5, 2.0])
