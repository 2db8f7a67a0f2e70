"""
Run configuration: TOML file -> validated pydantic models -> library value objects.

Precedence is CLI flag > environment (.env honoured) > file > default.
"""

import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .constants import (
    CONFIG_SCHEMA_VERSION,
    DEFAULT_N_THETA,
    DEFAULT_N_PHI,
    DEFAULT_N_OMEGA,
    DEFAULT_OMEGA_MIN,
    DEFAULT_OMEGA_MAX,
    DEFAULT_T_END,
    DEFAULT_N_TIME_POINTS,
    DEFAULT_SNAPSHOT_TIME,
    DEFAULT_PEAK_PROMINENCE,
    FREE_ELECTRON_G,
    J3_NEGLIGIBLE_RATIO,
    ENV_WORKERS,
    ENV_LOG_LEVEL,
    ERROR_EMPTY_SCAN,
)
from .exceptions import ConfigFileNotFoundError, ConfigSchemaError, MRTSError
from .hamiltonian import ModelParams, Orientation
from .lindblad import RateParams
from .units import Quantity, parse_field, normalize_energy_unit

logger = logging.getLogger(__name__)

load_dotenv()

# resolved-config keys left out of provenance headers
EXECUTION_POLICY_KEYS = ("run.workers", "run.output_dir")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_quantity(value: str) -> str:
    try:
        Quantity.parse(value)
    except MRTSError as e:
        raise ValueError(e.message)
    return value


class ModelSection(_Section):
    J0: str = "0 mT"
    J1: str = "0 mT"
    J2: Optional[str] = None
    J3: str = "0 mT"
    D: str = "0 cm-1"
    E: str = "0 cm-1"
    V: str = "0 rad/ns"
    g_r: float = FREE_ELECTRON_G
    g_c: float = FREE_ELECTRON_G
    B: str = "350 mT"
    pulse_on: float = 0.0
    pulse_off: float = 0.0

    @field_validator("J0", "J1", "J2", "J3", "D", "E", "V")
    @classmethod
    def _energy(cls, value):
        return value if value is None else _check_quantity(value)

    @field_validator("B")
    @classmethod
    def _field(cls, value):
        try:
            if parse_field(value) < 0:
                raise ValueError("field magnitude must be >= 0")
        except MRTSError as e:
            raise ValueError(e.message)
        return value

    @model_validator(mode="after")
    def _window(self):
        if self.pulse_on > self.pulse_off:
            raise ValueError("pulse_on must not exceed pulse_off")
        return self

    def to_params(self) -> ModelParams:
        """J2 defaults to J1 (inversion-symmetric coupler)."""
        return ModelParams.from_quantities({
            "J0": self.J0,
            "J1": self.J1,
            "J2": self.J2 if self.J2 is not None else self.J1,
            "J3": self.J3,
            "D": self.D,
            "E": self.E,
            "V": self.V,
            "g_r": self.g_r,
            "g_c": self.g_c,
            "B_mag": self.B,
            "pulse_window": (self.pulse_on, self.pulse_off),
        })


class RatesSection(_Section):
    gamma_radical: float = Field(ge=0)
    gamma_triplet: float = Field(ge=0)
    k_st: float = Field(ge=0)
    k_tg: float = Field(ge=0)
    k_eg: float = Field(ge=0)

    def to_rates(self) -> RateParams:
        return RateParams(**self.model_dump())


class InitialStateSection(_Section):
    kind: Literal["thermal", "pure", "maximally_mixed"] = "thermal"
    # None is infinite temperature
    temperature_K: Optional[float] = Field(default=None, gt=0)
    label: Optional[str] = None

    @model_validator(mode="after")
    def _label_for_pure(self):
        if self.kind == "pure" and not self.label:
            raise ValueError("kind = 'pure' needs a label")
        return self


class TimeSection(_Section):
    t_end: float = Field(default=DEFAULT_T_END, gt=0)
    n_points: int = Field(default=DEFAULT_N_TIME_POINTS, ge=2)


class OrientationSection(_Section):
    theta: float = Field(default=0.0, ge=0, le=math.pi)
    phi: float = Field(default=0.0, ge=0, lt=2 * math.pi)
    n_theta: int = Field(default=DEFAULT_N_THETA, ge=1)
    n_phi: int = Field(default=DEFAULT_N_PHI, ge=1)
    weighted: bool = False

    @property
    def is_powder(self) -> bool:
        return self.n_theta * self.n_phi > 1

    def single(self) -> Orientation:
        return Orientation(self.theta, self.phi)


class DynamicsSection(_Section):
    coherence_bra: str = "ud"
    coherence_ket: str = "du"
    populations: List[str] = Field(default_factory=lambda: ["T1:1/2,1,-1/2"])
    snapshot_times: List[float] = Field(default_factory=lambda: [DEFAULT_SNAPSHOT_TIME])
    peak_prominence: float = Field(default=DEFAULT_PEAK_PROMINENCE, ge=0)


class SpectrumSection(_Section):
    omega_min: float = DEFAULT_OMEGA_MIN
    omega_max: float = DEFAULT_OMEGA_MAX
    n_omega: int = Field(default=DEFAULT_N_OMEGA, ge=1)
    t: float = Field(default=DEFAULT_SNAPSHOT_TIME, ge=0)
    solver: Literal["lu", "schur"] = "lu"
    peak_prominence: float = Field(default=DEFAULT_PEAK_PROMINENCE, ge=0)

    @model_validator(mode="after")
    def _window(self):
        if self.n_omega > 1 and not self.omega_max > self.omega_min:
            raise ValueError("omega_max must exceed omega_min")
        return self


class ScanSection(_Section):
    j1_values: List[str] = Field(default_factory=lambda: ["-10 mT", "-1000 mT", "-100000 mT"])

    @field_validator("j1_values")
    @classmethod
    def _values(cls, values):
        if not values:
            raise ValueError(ERROR_EMPTY_SCAN)
        return [_check_quantity(v) for v in values]

    def unique_values(self) -> List[float]:
        """J1 values in rad/ns, duplicates dropped with a warning, order kept."""
        seen: List[float] = []
        for text in self.j1_values:
            value = Quantity.parse(text).to_internal()
            if any(math.isclose(value, other, rel_tol=1e-12, abs_tol=1e-15) for other in seen):
                logger.warning(f"Duplicate J1 scan value {text} dropped")
                continue
            seen.append(value)
        return seen


class ExchangeSection(_Section):
    output_unit: str = "K"
    j3_negligible_ratio: float = Field(default=J3_NEGLIGIBLE_RATIO, ge=0)

    @field_validator("output_unit")
    @classmethod
    def _unit(cls, value):
        try:
            return normalize_energy_unit(value)
        except MRTSError as e:
            raise ValueError(e.message)


class RunSection(_Section):
    workers: int = Field(default=1, ge=1)
    output_dir: str = "results"
    seed: int = 0


class RunConfig(_Section):
    """Complete, validated run configuration."""

    schema_version: Literal[1] = CONFIG_SCHEMA_VERSION
    model: ModelSection = Field(default_factory=ModelSection)
    rates: RatesSection
    initial_state: InitialStateSection = Field(default_factory=InitialStateSection)
    time: TimeSection = Field(default_factory=TimeSection)
    orientation: OrientationSection = Field(default_factory=OrientationSection)
    dynamics: DynamicsSection = Field(default_factory=DynamicsSection)
    spectrum: SpectrumSection = Field(default_factory=SpectrumSection)
    scan: ScanSection = Field(default_factory=ScanSection)
    exchange: ExchangeSection = Field(default_factory=ExchangeSection)
    run: RunSection = Field(default_factory=RunSection)

    def canonical_lines(self) -> List[str]:
        """Sorted 'key = value' lines of the resolved config, execution policy excluded."""
        flat = _flatten(self.model_dump(mode="json"))
        return [
            f"{key} = {json.dumps(value, sort_keys=True)}"
            for key, value in sorted(flat.items())
            if key not in EXECUTION_POLICY_KEYS
        ]


def _flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, path + "."))
        else:
            flat[path] = value
    return flat


def _problems(error: ValidationError) -> List[str]:
    problems = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        problems.append(f"{location}: {item['msg']}")
    return problems


def parse_config(data: Dict[str, Any]) -> RunConfig:
    """Validate a raw mapping; every problem is reported with its key path."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigSchemaError(_problems(e))


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Load and validate a TOML run config.

    Args:
        path: Config file path
        overrides: Dotted-key overrides applied after env, e.g. {'run.workers': 4}

    Returns:
        Validated RunConfig

    Raises:
        ConfigFileNotFoundError: path does not exist
        ConfigSchemaError: TOML syntax or schema problems
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigFileNotFoundError(str(path))
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except tomllib.TOMLDecodeError as e:
        raise ConfigSchemaError([f"{path}: {e}"])

    env_workers = os.getenv(ENV_WORKERS)
    if env_workers:
        try:
            _set_dotted(data, "run.workers", int(env_workers))
        except ValueError:
            raise ConfigSchemaError([f"{ENV_WORKERS}: not an integer: {env_workers!r}"])

    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(data, key, value)

    config = parse_config(data)
    logger.info(f"Loaded config {path} (schema v{config.schema_version})")
    return config


def _set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    *parents, leaf = key.split(".")
    node = data
    for part in parents:
        node = node.setdefault(part, {})
    node[leaf] = value


def env_log_level(default: str = "INFO") -> str:
    return os.getenv(ENV_LOG_LEVEL, default).upper()


def time_grid(section: TimeSection) -> np.ndarray:
    """Uniform grid 0 .. t_end with n_points samples."""
    return np.linspace(0.0, section.t_end, section.n_points)
