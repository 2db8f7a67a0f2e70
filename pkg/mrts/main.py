"""
MRTS command-line entry point.

Sub-commands:
    mrts dynamics  --config FILE      trajectory + tomography snapshots
    mrts spectrum  --config FILE      single-orientation or powder spectrum
    mrts scan-j1   --config FILE      one spectrum per J1 (J2 = J1)
    mrts exchange  TABLE [TABLE ...]  couplings J0..J3 from energy tables

Every output file opens with '# ' provenance lines (artifact version, command, resolved
config without run.workers / run.output_dir), followed by a comma-separated table:

    trajectory.csv                 t_ns, pop[<label>]..., p_S0, p_S1, p_T1,
                                   coh_re, coh_im, coh_abs
    tomography_t<t>ns.csv          row, abs_uu..abs_dd, re_uu..re_dd, im_uu..im_dd
    spectrum_single.csv            omega_rad_per_ns, intensity
    spectrum_powder.csv            omega_rad_per_ns, intensity
    spectrum_powder_timings.csv    index, theta, phi, seconds
    scan_j1_<NN>.csv               omega_rad_per_ns, intensity
    scan_j1_combined.csv           omega_rad_per_ns, intensity[J1=<value> mT]...
    exchange_couplings.csv         angle_deg, J0, J0_class, J1, J1_class, J2, J2_class,
                                   J3, J3_class, J3_negligible

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure,
4 exchange-extraction error, 1 anything unexpected.
"""

from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence
import argparse
import logging
import multiprocessing
import os
import sys
import time

import numpy as np

from .core import exceptions
from .core.config import RunConfig, env_log_level, load_config, time_grid
from .core.constants import (
    ARTIFACT_VERSION,
    EXIT_OK,
    EXIT_UNEXPECTED,
    EXIT_CONFIG_ERROR,
    EXIT_NUMERICAL_ERROR,
    EXIT_EXCHANGE_ERROR,
    EXCHANGE_FILE,
    RESOLVENT_SOLVERS,
    SCAN_FILE_TEMPLATE,
    SCAN_SUMMARY_FILE,
    SPECTRUM_FILE_POWDER,
    SPECTRUM_FILE_SINGLE,
    TIMINGS_FILE_POWDER,
    TOMOGRAPHY_FILE_TEMPLATE,
    TRAJECTORY_FILE,
    WORKER_THREAD_ENV_VARS,
)
from .core.exceptions import MRTSError, handle_config_exception
from .core.units import from_internal
from .services.dynamics_service import InitialStateSpec, get_dynamics_service, tomography_snapshot
from .services.exchange_service import initialize_exchange_service
from .services.spectrum_service import SpectrumGrid, initialize_spectrum_service
from .utils.export import (
    provenance_header,
    scan_frame,
    spectrum_frame,
    timings_frame,
    tomography_frame,
    trajectory_frame,
    write_table,
)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


# === ERROR MAPPING ===

def exit_code_for(result: Dict[str, Any]) -> int:
    """Exit code for a failed result dict, chosen by the error family."""
    error_class = getattr(exceptions, result.get("error_code", ""), None)
    if not isinstance(error_class, type):
        return EXIT_UNEXPECTED
    if issubclass(error_class, (exceptions.ConfigurationError, exceptions.ParameterError,
                                exceptions.SpinAlgebraError)):
        return EXIT_CONFIG_ERROR
    if issubclass(error_class, exceptions.NumericalError):
        return EXIT_NUMERICAL_ERROR
    if issubclass(error_class, exceptions.ExchangeError):
        return EXIT_EXCHANGE_ERROR
    return EXIT_UNEXPECTED


def _fail(result: Dict[str, Any]) -> int:
    logger.error(f"{result.get('error_code', 'Error')}: {result.get('error')}")
    for key, value in (result.get("details") or {}).items():
        logger.error(f"  {key}: {value}")
    return exit_code_for(result)


# === WORKER POOL ===

def _worker_init(log_level: str) -> None:
    logging.basicConfig(level=log_level, format=LOG_FORMAT)


@contextmanager
def worker_pool(workers: int, log_level: str) -> Iterator:
    """
    Spawned process pool yielding an imap_unordered mapper.

    BLAS threading is pinned to one thread per worker so every orientation is computed
    the same way regardless of the worker count.
    """
    saved = {var: os.environ.get(var) for var in WORKER_THREAD_ENV_VARS}
    os.environ.update({var: "1" for var in WORKER_THREAD_ENV_VARS})
    try:
        context = multiprocessing.get_context("spawn")
        with context.Pool(processes=workers, initializer=_worker_init,
                          initargs=(log_level,)) as pool:
            logger.info(f"Started {workers} worker process(es)")
            yield pool.imap_unordered
    finally:
        for var, value in saved.items():
            if value is None:
                os.environ.pop(var, None)
            else:
                os.environ[var] = value


# === HELPERS ===

def _initial_spec(config: RunConfig) -> InitialStateSpec:
    section = config.initial_state
    return InitialStateSpec(section.kind, section.temperature_K, section.label)


def _spectrum_grid(config: RunConfig) -> SpectrumGrid:
    section = config.spectrum
    params = config.model.to_params()
    return SpectrumGrid.uniform(section.omega_min, section.omega_max, section.n_omega,
                                params.B_mag, section.t)


def _header(command: str, config: Optional[RunConfig], extra: Optional[Dict[str, Any]] = None) -> List[str]:
    lines = config.canonical_lines() if config is not None else []
    return provenance_header(command, lines, extra)


class Stage:
    """Logs start and wall-clock duration of a command stage."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        self.started = time.perf_counter()
        logger.info(f"{self.name}: started")
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            logger.info(f"{self.name}: done in {time.perf_counter() - self.started:.2f} s")
        return False


# === COMMANDS ===

def cmd_dynamics(config: RunConfig, out_dir: Path, log_level: str) -> int:
    """Trajectory at the configured orientation plus tomography snapshots."""
    params = config.model.to_params()
    rates = config.rates.to_rates()
    orient = config.orientation.single()
    section = config.dynamics

    times = time_grid(config.time)
    snapshots = []
    for t in section.snapshot_times:
        if 0.0 <= t <= times[-1]:
            snapshots.append(t)
        else:
            logger.warning(f"Snapshot time {t} ns lies outside [0, {times[-1]}] ns, skipped")
    times = np.union1d(times, snapshots)

    with Stage("dynamics"):
        try:
            rho0 = _initial_spec(config).build(params, orient)
        except MRTSError as e:
            return _fail(e.to_dict())
        result = get_dynamics_service().run_dynamics(params, rates, orient, rho0, times)
        if not result["success"]:
            return _fail(result)
        trajectory = result["trajectory"]

    try:
        frame = trajectory_frame(trajectory, section.coherence_bra, section.coherence_ket,
                                 section.populations)
    except MRTSError as e:
        return _fail(e.to_dict())

    extra = {"points": len(trajectory)}
    write_table(out_dir / TRAJECTORY_FILE, frame, _header("dynamics", config, extra))
    for t in snapshots:
        snapshot = tomography_snapshot(trajectory, t)
        write_table(
            out_dir / TOMOGRAPHY_FILE_TEMPLATE.format(time=snapshot.time),
            tomography_frame(snapshot),
            _header("dynamics", config, {"snapshot_t_ns": repr(snapshot.time)}),
        )
    return EXIT_OK


def cmd_spectrum(config: RunConfig, out_dir: Path, log_level: str) -> int:
    """Single-orientation spectrum for a 1x1 grid, powder average otherwise."""
    params = config.model.to_params()
    rates = config.rates.to_rates()
    grid = _spectrum_grid(config)
    section = config.orientation
    service = initialize_spectrum_service(config.spectrum.solver)
    spec = _initial_spec(config)

    with Stage("spectrum"):
        if not section.is_powder:
            result = service.run_single(params, rates, spec, section.single(), grid)
        else:
            with worker_pool(config.run.workers, log_level) as mapper:
                result = service.run_powder(params, rates, spec, grid, section.n_theta,
                                            section.n_phi, section.weighted, mapper)
    if not result["success"]:
        return _fail(result)

    spectrum = result["spectrum"]
    extra = {"evaluations": spectrum.evaluations}
    if not spectrum.is_powder:
        write_table(out_dir / SPECTRUM_FILE_SINGLE, spectrum_frame(spectrum),
                    _header("spectrum", config, extra))
        return EXIT_OK

    write_table(out_dir / SPECTRUM_FILE_POWDER, spectrum_frame(spectrum),
                _header("spectrum", config, extra))
    write_table(out_dir / TIMINGS_FILE_POWDER, timings_frame(spectrum),
                _header("spectrum", config, {"workers": config.run.workers}))
    return EXIT_OK


def cmd_scan_j1(config: RunConfig, out_dir: Path, log_level: str) -> int:
    """One spectrum per distinct J1 value; J2 follows J1."""
    params = config.model.to_params()
    rates = config.rates.to_rates()
    grid = _spectrum_grid(config)
    section = config.orientation
    service = initialize_spectrum_service(config.spectrum.solver)
    j1_values = config.scan.unique_values()
    orientation = None if section.is_powder else section.single()

    with Stage(f"scan-j1 over {len(j1_values)} value(s)"):
        if orientation is not None:
            result = service.run_scan(j1_values, params, rates, _initial_spec(config), grid,
                                      orientation)
        else:
            with worker_pool(config.run.workers, log_level) as mapper:
                result = service.run_scan(j1_values, params, rates, _initial_spec(config), grid,
                                          None, section.n_theta, section.n_phi,
                                          section.weighted, mapper)
    if not result["success"]:
        return _fail(result)

    spectra = result["spectra"]
    for index, (j1, spectrum) in enumerate(zip(j1_values, spectra)):
        extra = {
            "scan_index": index,
            "J1_mT": repr(from_internal(j1, "mT")),
            "evaluations": spectrum.evaluations,
        }
        write_table(out_dir / SCAN_FILE_TEMPLATE.format(index=index), spectrum_frame(spectrum),
                    _header("scan-j1", config, extra))
    write_table(out_dir / SCAN_SUMMARY_FILE, scan_frame(spectra, j1_values),
                _header("scan-j1", config))
    return EXIT_OK


def cmd_exchange(inputs: Sequence[str], out_dir: Path, unit: Optional[str],
                 config: Optional[RunConfig]) -> int:
    """Couplings from energy tables, one row per table sorted by angle."""
    unit = unit or (config.exchange.output_unit if config is not None else "K")
    ratio = config.exchange.j3_negligible_ratio if config is not None else None
    try:
        service = (initialize_exchange_service(unit) if ratio is None
                   else initialize_exchange_service(unit, ratio))
    except MRTSError as e:
        return _fail(e.to_dict())

    with Stage(f"exchange over {len(inputs)} file(s)"):
        result = service.process_files(inputs)
    if not result["success"]:
        return _fail(result)

    scan = result["scan"]
    extra: Dict[str, Any] = {
        "inputs": " ".join(str(Path(p)) for p in inputs),
        "unit": scan.unit,
        "j3_negligible_ratio": service.j3_ratio,
        "j1_monotonic": scan.j1_monotonic,
    }
    for number, warning in enumerate(scan.warnings):
        extra[f"warning_{number}"] = warning
    write_table(out_dir / EXCHANGE_FILE, scan.to_frame(), _header("exchange", config, extra))
    return EXIT_OK


# === ARGUMENT PARSING ===

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrts",
        description="Lindblad spin dynamics, TREPR spectra and exchange couplings for "
                    "radical / triplet-coupler / radical molecules.",
    )
    parser.add_argument("--version", action="version", version=f"mrts {ARTIFACT_VERSION}")
    parser.add_argument("--log-level", default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging level (default: $MRTS_LOG_LEVEL or INFO).")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("dynamics", "Propagate rho(t) and write trajectory and tomography files."),
        ("spectrum", "Single-orientation or powder-averaged TREPR spectrum."),
        ("scan-j1", "Spectra for each configured J1 value (J2 = J1)."),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, help="TOML run configuration.")
        sub.add_argument("--out", default=None, help="Output directory (overrides run.output_dir).")
        sub.add_argument("--workers", type=int, default=None,
                         help="Worker processes (overrides $MRTS_WORKERS and run.workers).")
        sub.add_argument("--weighted-powder", action="store_true", default=None,
                         help="Weight orientations by sin(theta).")
        sub.add_argument("--solver", choices=RESOLVENT_SOLVERS, default=None,
                         help="Resolvent solver (overrides spectrum.solver).")

    exchange = commands.add_parser("exchange", help="Exchange couplings from energy tables.")
    exchange.add_argument("inputs", nargs="+", help="Energy-table or dihedral-scan files.")
    exchange.add_argument("--unit", default=None, help="Output energy unit (default K).")
    exchange.add_argument("--config", default=None, help="Optional TOML run configuration.")
    exchange.add_argument("--out", default=None, help="Output directory.")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "run.workers": getattr(args, "workers", None),
        "run.output_dir": getattr(args, "out", None),
        "orientation.weighted": getattr(args, "weighted_powder", None),
        "spectrum.solver": getattr(args, "solver", None),
    }


COMMANDS = {
    "dynamics": cmd_dynamics,
    "spectrum": cmd_spectrum,
    "scan-j1": cmd_scan_j1,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, load the config and dispatch; returns the exit code."""
    args = build_parser().parse_args(argv)
    log_level = args.log_level or env_log_level()
    logging.basicConfig(level=log_level, format=LOG_FORMAT)

    try:
        config = None
        if args.config is not None:
            config = load_config(args.config, _overrides(args))

        if args.command == "exchange":
            out_dir = Path(args.out or (config.run.output_dir if config is not None else "."))
            return cmd_exchange(args.inputs, out_dir, args.unit, config)

        out_dir = Path(config.run.output_dir)
        logger.info(f"Running '{args.command}' with output directory {out_dir}")
        return COMMANDS[args.command](config, out_dir, log_level)
    except (exceptions.ConfigurationError, OSError) as e:
        return _fail(handle_config_exception(e))
    except MRTSError as e:
        return _fail(e.to_dict())
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        return EXIT_UNEXPECTED


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
